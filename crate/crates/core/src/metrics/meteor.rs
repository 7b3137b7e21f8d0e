use std::borrow::Cow;
use std::sync::OnceLock;

use rayon::prelude::*;
use rust_stemmers::{Algorithm, Stemmer};

use super::CaptionCorpus;
use crate::Result;

/// English Snowball stem of a lowercase token.
pub fn stem(token: &str) -> Cow<'_, str> {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English)).stem(token)
}

/// Greedy two-stage alignment. Returns `(candidate index, reference index)` pairs sorted by
/// candidate index.
fn align(cand: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut ref_used = vec![false; reference.len()];
    let mut cand_match: Vec<Option<usize>> = vec![None; cand.len()];

    for (i, c) in cand.iter().enumerate() {
        if let Some(j) = (0..reference.len()).find(|&j| !ref_used[j] && reference[j] == *c) {
            ref_used[j] = true;
            cand_match[i] = Some(j);
        }
    }

    let ref_stems: Vec<_> = reference.iter().map(|r| stem(r)).collect();
    for (i, c) in cand.iter().enumerate() {
        if cand_match[i].is_some() {
            continue;
        }
        let s = stem(c);
        if let Some(j) = (0..reference.len()).find(|&j| !ref_used[j] && ref_stems[j] == s) {
            ref_used[j] = true;
            cand_match[i] = Some(j);
        }
    }

    cand_match
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect()
}

fn chunks(alignment: &[(usize, usize)]) -> usize {
    if alignment.is_empty() {
        return 0;
    }
    1 + alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

fn sentence_score(cand: &[String], reference: &[String]) -> f64 {
    let alignment = align(cand, reference);
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let m_f = m as f64;
    let p = m_f / cand.len() as f64;
    let r = m_f / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks(&alignment) as f64 / m_f).powi(3);
    fmean * (1.0 - penalty)
}

/// METEOR without synonym matching: exact then stem alignment, fragmentation penalty,
/// best reference per item, mean over items.
pub fn meteor_lite(corpus: &CaptionCorpus) -> Result<f64> {
    let items = corpus.non_empty()?;
    let per_item: Vec<f64> = items
        .par_iter()
        .map(|it| {
            it.references
                .iter()
                .map(|r| sentence_score(&it.candidate, r))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(per_item.iter().sum::<f64>() / items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;

    #[test]
    fn identical_sentence_closed_form() {
        let t = tokenize("minor forest loss is visible");
        let m = t.len() as f64;
        let want = 1.0 - 0.5 / m.powi(3);
        assert!((sentence_score(&t, &t) - want).abs() < 1e-15);
    }

    #[test]
    fn no_matches_is_zero() {
        assert_eq!(sentence_score(&tokenize("a b"), &tokenize("c d")), 0.0);
    }

    #[test]
    fn stem_stage_matches_plural() {
        assert_eq!(stem("trees"), "tree");
        let (c, r) = (tokenize("trees removed"), tokenize("tree removed"));
        let a = align(&c, &r);
        assert_eq!(a, vec![(0, 0), (1, 1)]);
        assert_eq!(chunks(&a), 1);
        // m = 2, P = R = 1, one chunk
        assert!((sentence_score(&c, &r) - (1.0 - 0.5 / 8.0)).abs() < 1e-15);
    }

    #[test]
    fn reordering_adds_chunks() {
        let (c, r) = (tokenize("c d a b"), tokenize("a b c d"));
        let a = align(&c, &r);
        assert_eq!(chunks(&a), 2);
        let want = 1.0 - 0.5 * (2.0f64 / 4.0).powi(3);
        assert!((sentence_score(&c, &r) - want).abs() < 1e-15);
    }
}
