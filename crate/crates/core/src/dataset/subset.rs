use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::index::{DatasetIndex, Split};
use crate::{Error, Result};

pub const TREE_KEYWORDS: [&str; 10] =
    ["tree", "trees", "wood", "woods", "woodland", "wooded", "forest", "forests", "jungle", "jungles"];

/// True when any caption contains a keyword as a whole token.
///
/// Tokens are maximal runs of alphanumeric characters, compared case-insensitively.
pub fn mentions_trees<S: AsRef<str>>(captions: &[S]) -> bool {
    captions.iter().any(|c| {
        c.as_ref()
            .split(|ch: char| !ch.is_alphanumeric())
            .any(|tok| TREE_KEYWORDS.iter().any(|k| tok.eq_ignore_ascii_case(k)))
    })
}

pub fn filter_tree_examples(index: &DatasetIndex) -> DatasetIndex {
    index.retain(|e| mentions_trees(&e.captions))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }

    pub fn get(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Split sizes for `n` examples: val and test are floored, train takes the remainder.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("split ratios {ratios:?} must be in [0, 1] and sum to 1")));
    }
    // The epsilon keeps ratios derived from counts (31/334) from flooring one short.
    let floor = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
    let val = floor(ratios[1]);
    let test = floor(ratios[2]).min(n - val);
    Ok([n - val - test, val, test])
}

/// Pools every example, shuffles with `seed`, then cuts train / val / test in order.
pub fn make_splits(index: &DatasetIndex, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    let mut ids: Vec<String> = index.examples().map(|e| e.id.clone()).collect();
    if ids.is_empty() {
        return Err(Error::Empty("dataset index"));
    }
    ids.sort();
    let [train, val, _] = split_sizes(ids.len(), ratios)?;
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = ids.split_off(train + val);
    let val = ids.split_off(train);
    Ok(SplitAssignment { train: ids, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_matching_is_whole_token() {
        assert!(mentions_trees(&["trees removed along the road"]));
        assert!(mentions_trees(&["Some FOREST, cleared."]));
        assert!(mentions_trees(&["a tree-lined street"]));
        assert!(!mentions_trees(&["hardwood floor"]));
        assert!(!mentions_trees(&["streets and buildings", "woodpecker"]));
        assert!(!mentions_trees::<&str>(&[]));
    }

    #[test]
    fn sizes_follow_floor_rule() {
        assert_eq!(split_sizes(10, [0.8, 0.1, 0.1]).unwrap(), [8, 1, 1]);
        assert_eq!(split_sizes(334, [0.8, 0.1, 0.1]).unwrap(), [268, 33, 33]);
        let n = 334.0;
        assert_eq!(split_sizes(334, [270.0 / n, 31.0 / n, 33.0 / n]).unwrap(), [270, 31, 33]);
        assert!(split_sizes(10, [0.5, 0.5, 0.5]).is_err());
        assert_eq!(split_sizes(1, [0.0, 0.0, 1.0]).unwrap(), [0, 0, 1]);
    }
}
