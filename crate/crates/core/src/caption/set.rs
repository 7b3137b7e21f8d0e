use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extract_features, render_caption, NO_CHANGE_SENTENCES};
use crate::raster::ChangeMask;
use crate::{Error, Result};

pub const GENERATED_PER_SET: usize = 4;
pub const MAX_ATTEMPTS: usize = 32;

/// One human caption (when available) plus four generated ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionSet {
    pub human: Option<String>,
    pub generated: Vec<String>,
}

impl CaptionSet {
    /// Human caption first, then the generated ones.
    pub fn all(&self) -> Vec<&str> {
        self.human
            .iter()
            .map(String::as_str)
            .chain(self.generated.iter().map(String::as_str))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.generated.len() + usize::from(self.human.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws four pairwise-distinct generated captions for `mask`.
pub fn generate_caption_set(mask: &ChangeMask, human: Option<&str>, seed: u64) -> Result<CaptionSet> {
    let features = extract_features(mask)?;
    let human = human.map(str::to_string);
    if features.patch_count == 0 {
        return Ok(CaptionSet {
            human,
            generated: NO_CHANGE_SENTENCES.iter().map(|s| s.to_string()).collect(),
        });
    }

    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut generated: Vec<String> = Vec::with_capacity(GENERATED_PER_SET);
    for _ in 0..MAX_ATTEMPTS {
        let caption = render_caption(&features, seeds.next_u64());
        if !generated.contains(&caption) {
            generated.push(caption);
            if generated.len() == GENERATED_PER_SET {
                return Ok(CaptionSet { human, generated });
            }
        }
    }
    Err(Error::CaptionExhausted {
        wanted: GENERATED_PER_SET,
        attempts: MAX_ATTEMPTS,
    })
}
