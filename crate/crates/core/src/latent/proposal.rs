use std::fmt;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::raster::ChangeMask;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Time {
    T1,
    T2,
}

impl Time {
    pub fn other(self) -> Time {
        match self {
            Time::T1 => Time::T2,
            Time::T2 => Time::T1,
        }
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Time::T1 => "t1",
            Time::T2 => "t2",
        })
    }
}

impl std::str::FromStr for Time {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" | "1" | "a" => Ok(Time::T1),
            "t2" | "2" | "b" => Ok(Time::T2),
            other => Err(Error::InvalidArgument(format!("unknown time {other:?}"))),
        }
    }
}

/// Row-major run-length encoding of a binary footprint. Runs alternate between 0 and 1,
/// starting with a (possibly empty) run of zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Footprint {
    runs: Vec<u32>,
}

impl Footprint {
    pub fn from_runs(runs: Vec<u32>) -> Self {
        Self { runs }
    }

    pub fn from_mask(mask: &ChangeMask) -> Self {
        let mut runs = Vec::new();
        let mut current = 0u8;
        let mut len = 0u32;
        for &b in mask.bits() {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        Self { runs }
    }

    /// Axis-aligned rectangle with top-left corner `(row, col)`.
    pub fn rectangle(width: u32, height: u32, row: u32, col: u32, rows: u32, cols: u32) -> Result<Self> {
        if rows == 0 || cols == 0 || row + rows > height || col + cols > width {
            return Err(Error::InvalidArgument(format!(
                "rectangle {rows}x{cols} at ({row}, {col}) does not fit {width}x{height}"
            )));
        }
        let mut runs = vec![row * width + col, cols];
        for _ in 1..rows {
            runs.push(width - cols);
            runs.push(cols);
        }
        runs.push((height - row - rows) * width + (width - col - cols));
        Ok(Self { runs })
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Total pixels covered by the encoding.
    pub fn len(&self) -> u64 {
        self.runs.iter().map(|&r| r as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pixel_count() == 0
    }

    /// Number of foreground pixels.
    pub fn pixel_count(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| r as u64).sum()
    }

    pub fn contains_index(&self, idx: u64) -> bool {
        let mut start = 0u64;
        for (i, &r) in self.runs.iter().enumerate() {
            let end = start + r as u64;
            if idx < end {
                return i % 2 == 1;
            }
            start = end;
        }
        false
    }

    pub fn contains(&self, row: u32, col: u32, width: u32) -> bool {
        self.contains_index(row as u64 * width as u64 + col as u64)
    }

    /// Sets every foreground pixel of the footprint in `mask`.
    pub fn paint(&self, mask: &mut ChangeMask) -> Result<()> {
        if self.len() != mask.len() as u64 {
            return Err(Error::InvalidArgument(format!(
                "footprint covers {} pixels but the image has {}",
                self.len(),
                mask.len()
            )));
        }
        let w = mask.width() as u64;
        let mut start = 0u64;
        for (i, &r) in self.runs.iter().enumerate() {
            if i % 2 == 1 {
                for idx in start..start + r as u64 {
                    mask.set((idx / w) as u32, (idx % w) as u32, true);
                }
            }
            start += r as u64;
        }
        Ok(())
    }

    pub fn to_mask(&self, width: u32, height: u32) -> Result<ChangeMask> {
        let mut mask = ChangeMask::empty(width, height)?;
        self.paint(&mut mask)?;
        Ok(mask)
    }
}

/// A candidate region observed at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u32,
    pub time: Time,
    pub footprint: Footprint,
    pub area_fraction: f64,
    pub stability: f64,
    #[serde(with = "f32_base64")]
    pub emb_same: Vec<f32>,
    #[serde(with = "f32_base64")]
    pub emb_other: Vec<f32>,
}

impl Proposal {
    /// Canonical ordering key.
    pub fn key(&self) -> (Time, u32) {
        (self.time, self.id)
    }
}

/// Little-endian f32 arrays as base64 strings.
mod f32_base64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f32], s: S) -> std::result::Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f32>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text.as_bytes()).map_err(serde::de::Error::custom)?;
        if bytes.len() % 4 != 0 {
            return Err(serde::de::Error::custom("embedding byte length is not a multiple of 4"));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Proposal exchange file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalFile {
    pub width: u32,
    pub height: u32,
    pub embedding_dim: usize,
    pub points_per_side: u32,
    pub proposals: Vec<Proposal>,
}

impl ProposalFile {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Error::Malformed { what: "proposal file".into(), detail };
        if self.width == 0 || self.height == 0 {
            return Err(bad(format!("zero image dimension {}x{}", self.width, self.height)));
        }
        let pixels = self.width as u64 * self.height as u64;
        for p in &self.proposals {
            let id = p.key();
            for (name, e) in [("emb_same", &p.emb_same), ("emb_other", &p.emb_other)] {
                if e.len() != self.embedding_dim {
                    return Err(bad(format!(
                        "{id:?} {name} has dimension {}, header says {}",
                        e.len(),
                        self.embedding_dim
                    )));
                }
                if e.iter().any(|x| !x.is_finite()) || e.iter().all(|&x| x == 0.0) {
                    return Err(bad(format!("{id:?} {name} is zero or non-finite")));
                }
            }
            if p.footprint.len() != pixels {
                return Err(bad(format!(
                    "{id:?} footprint covers {} pixels, image has {pixels}",
                    p.footprint.len()
                )));
            }
            if !(p.area_fraction > 0.0 && p.area_fraction <= 1.0) {
                return Err(bad(format!("{id:?} area_fraction {} outside (0, 1]", p.area_fraction)));
            }
            if !(0.0..=1.0).contains(&p.stability) {
                return Err(bad(format!("{id:?} stability {} outside [0, 1]", p.stability)));
            }
        }
        let mut keys: Vec<_> = self.proposals.iter().map(Proposal::key).collect();
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("duplicate proposal id".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProposalFile = serde_json::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Proposals of each acquisition time, in file order.
    pub fn split_by_time(&self) -> (Vec<Proposal>, Vec<Proposal>) {
        self.proposals.iter().cloned().partition(|p| p.time == Time::T1)
    }
}
