use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::{DatasetIndex, Example, Split};
use crate::{Error, Result};

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskStats {
    pub per_example: Vec<(String, f64)>,
    pub mean: f64,
    pub max: f64,
    /// Counts of change fractions in `HISTOGRAM_BINS` equal bins over `[0, 1]`.
    pub histogram: Vec<usize>,
}

/// Change-fraction summary over the given split, or over every split when `None`.
pub fn mask_stats(index: &DatasetIndex, split: Option<Split>) -> Result<MaskStats> {
    let examples: Vec<&Example> = match split {
        Some(s) => index.split(s).iter().collect(),
        None => index.examples().collect(),
    };
    if examples.is_empty() {
        return Err(Error::Empty("split"));
    }
    let per_example = examples
        .par_iter()
        .map(|e| Ok((e.id.clone(), e.load_mask()?.change_fraction())))
        .collect::<Result<Vec<_>>>()?;
    let fractions: Vec<f64> = per_example.iter().map(|(_, f)| *f).collect();
    Ok(summarise(per_example, &fractions))
}

fn summarise(per_example: Vec<(String, f64)>, fractions: &[f64]) -> MaskStats {
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let max = fractions.iter().copied().fold(0.0, f64::max);
    let mut histogram = vec![0; HISTOGRAM_BINS];
    for &f in fractions {
        let bin = ((f * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        histogram[bin] += 1;
    }
    MaskStats { per_example, mean, max, histogram }
}

/// Per-channel statistics in `[0, 1]` intensity units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub pixels: u64,
}

/// Exact integer running sums of 8-bit channel values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct ChannelSums {
    n: u64,
    sum: [u64; 3],
    sum_sq: [u128; 3],
}

impl ChannelSums {
    fn add(&mut self, img: &image::RgbImage) {
        for p in img.pixels() {
            for c in 0..3 {
                let v = p.0[c] as u64;
                self.sum[c] += v;
                self.sum_sq[c] += (v * v) as u128;
            }
        }
        self.n += u64::from(img.width()) * u64::from(img.height());
    }

    fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        for c in 0..3 {
            self.sum[c] += other.sum[c];
            self.sum_sq[c] += other.sum_sq[c];
        }
        self
    }

    fn finish(&self) -> Result<NormalizationStats> {
        if self.n == 0 {
            return Err(Error::Empty("split"));
        }
        let n = self.n as f64;
        let mut mean = [0.0; 3];
        let mut std = [0.0; 3];
        for c in 0..3 {
            // n²·var·255² = n·Σv² − (Σv)², exact in integers.
            let num = self.n as u128 * self.sum_sq[c] - (self.sum[c] as u128).pow(2);
            mean[c] = self.sum[c] as f64 / n / 255.0;
            std[c] = (num as f64).sqrt() / n / 255.0;
            if num == 0 {
                return Err(Error::InvalidArgument(format!("channel {c} has zero standard deviation")));
            }
        }
        Ok(NormalizationStats { mean, std, pixels: self.n })
    }
}

/// Streaming per-channel mean and population std over both images of every example.
pub fn normalization_stats(index: &DatasetIndex, split: Split) -> Result<NormalizationStats> {
    let examples = index.split(split);
    if examples.is_empty() {
        return Err(Error::Empty("split"));
    }
    let sums = examples
        .par_iter()
        .map(|e| {
            let mut s = ChannelSums::default();
            s.add(&image::open(&e.image_a)?.into_rgb8());
            s.add(&image::open(&e.image_b)?.into_rgb8());
            Ok::<_, Error>(s)
        })
        .try_reduce(ChannelSums::default, |a, b| Ok(a.merge(b)))?;
    sums.finish()
}

/// Same statistics over in-memory images.
pub fn normalization_stats_of<'a>(images: impl IntoIterator<Item = &'a image::RgbImage>) -> Result<NormalizationStats> {
    let mut s = ChannelSums::default();
    for img in images {
        s.add(img);
    }
    s.finish()
}
