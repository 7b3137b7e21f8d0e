use std::collections::HashMap;

use rayon::prelude::*;

use super::{ngrams, CaptionCorpus};
use crate::{Error, Result};

/// Gaussian length-penalty width.
pub const CIDER_SIGMA: f64 = 6.0;
const MAX_N: usize = 4;

type Grams<'a> = HashMap<&'a [String], usize>;

fn tfidf(counts: &Grams<'_>, df: &HashMap<Vec<String>, usize>, log_docs: f64) -> (HashMap<Vec<String>, f64>, f64) {
    let mut vec = HashMap::with_capacity(counts.len());
    let mut norm = 0.0;
    for (&g, &tf) in counts {
        let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
        let w = tf as f64 * (log_docs - d.ln());
        norm += w * w;
        vec.insert(g.to_vec(), w);
    }
    (vec, norm.sqrt())
}

/// CIDEr-D on the x10 scale.
///
/// Document frequencies are taken over each item's reference set. Candidate weights are
/// clipped to the reference weights in the numerator and a Gaussian length penalty with
/// sigma 6 is applied per reference.
pub fn cider_d(corpus: &CaptionCorpus) -> Result<f64> {
    let items = corpus.items();
    if items.len() < 2 {
        return Err(Error::CorpusTooSmall { required: 2, actual: items.len() });
    }
    let log_docs = (items.len() as f64).ln();

    let mut df: [HashMap<Vec<String>, usize>; MAX_N] = Default::default();
    for item in items {
        for n in 1..=MAX_N {
            let mut seen: Vec<&[String]> = item
                .references
                .iter()
                .flat_map(|r| ngrams(r, n).into_keys())
                .collect();
            seen.sort();
            seen.dedup();
            for g in seen {
                *df[n - 1].entry(g.to_vec()).or_insert(0) += 1;
            }
        }
    }

    let per_item: Vec<f64> = items
        .par_iter()
        .map(|item| {
            let mut total = 0.0;
            for n in 1..=MAX_N {
                let (cand, cand_norm) = tfidf(&ngrams(&item.candidate, n), &df[n - 1], log_docs);
                let mut sum = 0.0;
                for reference in &item.references {
                    let (refv, ref_norm) = tfidf(&ngrams(reference, n), &df[n - 1], log_docs);
                    let mut dot = 0.0;
                    for (g, &w) in &cand {
                        if let Some(&rw) = refv.get(g) {
                            dot += w.min(rw) * rw;
                        }
                    }
                    let mut sim = if cand_norm != 0.0 && ref_norm != 0.0 {
                        dot / (cand_norm * ref_norm)
                    } else {
                        0.0
                    };
                    let delta = item.candidate.len() as f64 - reference.len() as f64;
                    sim *= (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
                    sum += sim;
                }
                total += sum / item.references.len() as f64;
            }
            total / MAX_N as f64
        })
        .collect();

    Ok(10.0 * per_item.iter().sum::<f64>() / items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(items: &[(&str, &[&str])]) -> CaptionCorpus {
        CaptionCorpus::from_sentences(items.iter().map(|(c, r)| (*c, r.iter().copied()))).unwrap()
    }

    #[test]
    fn degenerate_idf_scores_zero() {
        let c = corpus(&[("a b c", &["a b c"]), ("a b c", &["a b c"]), ("a b c", &["a b c"])]);
        assert_eq!(cider_d(&c).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_scores_zero() {
        let c = corpus(&[("x y", &["a b"]), ("z w", &["c d"])]);
        assert_eq!(cider_d(&c).unwrap(), 0.0);
    }

    #[test]
    fn two_item_fixture() {
        // item 0: cand "a b", ref "a b c"; item 1: cand "d e", ref "d e".
        // Every reference n-gram has df = 1, idf = ln 2.
        // item 0, n=1: cand (a,b) weight ln2 each; ref (a,b,c): dot = 2 ln2^2,
        //   norms sqrt(2) ln2 and sqrt(3) ln2 -> 2/sqrt(6); n=2: 1/sqrt(2); n=3,4: 0.
        // length penalty exp(-1/72); item 1 scores exactly 1 at n = 1, 2 and 0 above.
        let c = corpus(&[("a b", &["a b c"]), ("d e", &["d e"])]);
        let lp = (-1.0f64 / 72.0).exp();
        let item0 = lp * (2.0 / 6f64.sqrt() + 1.0 / 2f64.sqrt()) / 4.0;
        let item1 = 2.0 / 4.0;
        let want = 10.0 * (item0 + item1) / 2.0;
        assert!((cider_d(&c).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn needs_two_items() {
        let c = corpus(&[("a", &["a"])]);
        assert!(matches!(cider_d(&c), Err(Error::CorpusTooSmall { .. })));
    }
}
