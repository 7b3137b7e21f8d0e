use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::raster::{BitemporalPair, ChangeMask};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub split: Split,
    pub image_a: PathBuf,
    pub image_b: PathBuf,
    pub mask: PathBuf,
    pub captions: Vec<String>,
    pub width: u32,
    pub height: u32,
}

impl Example {
    pub fn load_pair(&self) -> Result<BitemporalPair> {
        let a = image::open(&self.image_a)?.into_rgb8();
        let b = image::open(&self.image_b)?.into_rgb8();
        let gt = ChangeMask::load_png(&self.mask)?;
        BitemporalPair::new(a, b, Some(gt))
    }

    pub fn load_mask(&self) -> Result<ChangeMask> {
        ChangeMask::load_png(&self.mask)
    }
}

/// One entry of a per-split caption file (`captions_<split>.json`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub example_id: String,
    pub captions: Vec<String>,
    #[serde(default)]
    pub filename: String,
}

/// Examples per split, each split sorted by id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub splits: BTreeMap<Split, Vec<Example>>,
}

impl DatasetIndex {
    pub fn split(&self, split: Split) -> &[Example] {
        self.splits.get(&split).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.splits.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sizes(&self) -> [usize; 3] {
        Split::ALL.map(|s| self.split(s).len())
    }

    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.splits.values().flatten()
    }

    pub fn retain(&self, mut keep: impl FnMut(&Example) -> bool) -> DatasetIndex {
        let splits = self
            .splits
            .iter()
            .map(|(s, v)| (*s, v.iter().filter(|e| keep(e)).cloned().collect()))
            .collect();
        DatasetIndex { root: self.root.clone(), splits }
    }
}

pub fn caption_file_name(split: Split) -> String {
    format!("captions_{split}.json")
}

/// Indexes `root/{train,val,test}/{A,B,label}/<id>.png`.
///
/// Captions come from `captions_<split>.json` files at the root or, failing that, from a
/// LEVIR-CC style `{"images": [...]}` JSON file at the root. Splits without a directory
/// are empty.
pub fn load_index(root: impl AsRef<Path>) -> Result<DatasetIndex> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::MissingFile { example: String::new(), path: root.to_path_buf() });
    }
    let captions = load_captions(root)?;
    let mut splits = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for split in Split::ALL {
        let dir = root.join(split.as_str());
        let mut examples = Vec::new();
        if dir.is_dir() {
            for id in png_stems(&dir.join("A"))? {
                if !seen.insert(id.clone()) {
                    return Err(Error::Malformed {
                        what: "dataset index".into(),
                        detail: format!("example {id} appears in more than one split"),
                    });
                }
                let file = format!("{id}.png");
                let image_a = dir.join("A").join(&file);
                let image_b = dir.join("B").join(&file);
                let mask = dir.join("label").join(&file);
                for path in [&image_b, &mask] {
                    if !path.is_file() {
                        return Err(Error::MissingFile { example: id.clone(), path: path.clone() });
                    }
                }
                let dims = image::image_dimensions(&image_a)?;
                for path in [&image_b, &mask] {
                    let other = image::image_dimensions(path)?;
                    if other != dims {
                        return Err(Error::Malformed {
                            what: format!("example {id}"),
                            detail: format!(
                                "{} is {}x{} but image A is {}x{}",
                                path.display(),
                                other.0,
                                other.1,
                                dims.0,
                                dims.1
                            ),
                        });
                    }
                }
                let caps = captions.get(&(split, id.clone())).cloned().unwrap_or_default();
                examples.push(Example {
                    id,
                    split,
                    image_a,
                    image_b,
                    mask,
                    captions: caps,
                    width: dims.0,
                    height: dims.1,
                });
            }
        }
        splits.insert(split, examples);
    }
    Ok(DatasetIndex { root: root.to_path_buf(), splits })
}

fn png_stems(dir: &Path) -> Result<Vec<String>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut stems: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_owned))
        .collect();
    stems.sort();
    Ok(stems)
}

type CaptionMap = BTreeMap<(Split, String), Vec<String>>;

fn load_captions(root: &Path) -> Result<CaptionMap> {
    let mut map = CaptionMap::new();
    let mut found = false;
    for split in Split::ALL {
        let path = root.join(caption_file_name(split));
        if !path.is_file() {
            continue;
        }
        found = true;
        let records: Vec<CaptionRecord> = serde_json::from_slice(&fs::read(&path)?).map_err(|e| {
            Error::Malformed { what: path.display().to_string(), detail: e.to_string() }
        })?;
        for r in records {
            map.insert((split, r.example_id), r.captions);
        }
    }
    if found {
        return Ok(map);
    }
    let mut candidates: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    candidates.sort();
    for path in candidates {
        let value: serde_json::Value = match serde_json::from_slice(&fs::read(&path)?) {
            Ok(v) => v,
            Err(e) => return Err(Error::Malformed { what: path.display().to_string(), detail: e.to_string() }),
        };
        if let Some(images) = value.get("images").and_then(|v| v.as_array()) {
            for img in images {
                if let Some((split, id, caps)) = levir_entry(img) {
                    map.insert((split, id), caps);
                }
            }
            break;
        }
    }
    Ok(map)
}

fn levir_entry(img: &serde_json::Value) -> Option<(Split, String, Vec<String>)> {
    let filename = img.get("filename")?.as_str()?;
    let split_name = img.get("split").or_else(|| img.get("filepath"))?.as_str()?;
    let split = split_name.parse().ok()?;
    let id = Path::new(filename).file_stem()?.to_str()?.to_string();
    let caps = img
        .get("sentences")?
        .as_array()?
        .iter()
        .filter_map(|s| {
            s.get("raw").and_then(|r| r.as_str()).map(|r| r.trim().to_string()).or_else(|| {
                s.get("tokens")?
                    .as_array()
                    .map(|t| t.iter().filter_map(|x| x.as_str()).collect::<Vec<_>>().join(" "))
            })
        })
        .collect();
    Some((split, id, caps))
}

/// Writes one caption file per split in the layout [`load_index`] reads.
pub fn write_captions(index: &DatasetIndex, root: impl AsRef<Path>) -> Result<()> {
    for split in Split::ALL {
        let records: Vec<CaptionRecord> = index
            .split(split)
            .iter()
            .map(|e| CaptionRecord {
                example_id: e.id.clone(),
                captions: e.captions.clone(),
                filename: format!("{}.png", e.id),
            })
            .collect();
        let path = root.as_ref().join(caption_file_name(split));
        fs::write(path, serde_json::to_vec_pretty(&records)?)?;
    }
    Ok(())
}
