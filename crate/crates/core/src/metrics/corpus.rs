use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lowercases, splits on whitespace and strips non-alphanumeric characters.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|t| {
            t.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Counts of contiguous `n`-grams.
pub fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionItem {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionCorpus {
    items: Vec<CaptionItem>,
}

impl CaptionCorpus {
    /// Tokenises raw sentences. References that tokenise to nothing are dropped; an item
    /// left without references is rejected.
    pub fn from_sentences<C, R, S>(items: impl IntoIterator<Item = (C, R)>) -> Result<Self>
    where
        C: AsRef<str>,
        R: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let items = items
            .into_iter()
            .map(|(cand, refs)| CaptionItem {
                candidate: tokenize(cand.as_ref()),
                references: refs.into_iter().map(|r| tokenize(r.as_ref())).collect(),
            })
            .collect();
        Self::from_items(items)
    }

    pub fn from_items(items: Vec<CaptionItem>) -> Result<Self> {
        let mut kept = Vec::with_capacity(items.len());
        for (i, mut item) in items.into_iter().enumerate() {
            item.references.retain(|r| !r.is_empty());
            if item.references.is_empty() {
                return Err(Error::Malformed {
                    what: "caption corpus".into(),
                    detail: format!("item {i} has no non-empty reference"),
                });
            }
            kept.push(item);
        }
        Ok(Self { items: kept })
    }

    pub fn items(&self) -> &[CaptionItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub(crate) fn non_empty(&self) -> Result<&[CaptionItem]> {
        if self.items.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(&self.items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization_strips_punctuation() {
        assert_eq!(tokenize("Trees, REMOVED!  top-left"), vec!["trees", "removed", "topleft"]);
        assert!(tokenize(" -- ").is_empty());
    }

    #[test]
    fn ngram_counts() {
        let t = tokenize("a b a b");
        let bi = ngrams(&t, 2);
        assert_eq!(bi.len(), 2);
        assert_eq!(bi[&t[0..2]], 2);
        assert!(ngrams(&t, 5).is_empty());
    }

    #[test]
    fn rejects_items_without_references() {
        assert!(CaptionCorpus::from_sentences([("a", vec!["", "!!"])]).is_err());
        let c = CaptionCorpus::from_sentences([("a", vec!["", "a"])]).unwrap();
        assert_eq!(c.items()[0].references.len(), 1);
    }
}
