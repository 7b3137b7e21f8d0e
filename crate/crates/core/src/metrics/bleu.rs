use super::{ngrams, CaptionCorpus};
use crate::{Error, Result};

/// Corpus-level BLEU-n with uniform weights and the standard brevity penalty.
///
/// Clipped k-gram matches and candidate k-gram totals are summed over the corpus before
/// dividing. The effective reference length per item is the closest reference length,
/// ties broken towards the shorter one.
pub fn bleu(corpus: &CaptionCorpus, n: usize) -> Result<f64> {
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!("BLEU order must be 1..=4, got {n}")));
    }
    let items = corpus.non_empty()?;
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);

    for item in items {
        let c = item.candidate.len();
        cand_len += c;
        ref_len += item
            .references
            .iter()
            .map(|r| r.len())
            .min_by_key(|&r| (r.abs_diff(c), r))
            .unwrap_or(0);

        for k in 1..=n {
            let cand = ngrams(&item.candidate, k);
            let refs: Vec<_> = item.references.iter().map(|r| ngrams(r, k)).collect();
            for (gram, &count) in &cand {
                let max_ref = refs.iter().map(|r| r.get(gram).copied().unwrap_or(0)).max().unwrap_or(0);
                matched[k - 1] += count.min(max_ref);
            }
            total[k - 1] += item.candidate.len().saturating_sub(k - 1);
        }
    }

    if cand_len == 0 || (0..n).any(|k| matched[k] == 0) {
        return Ok(0.0);
    }
    let log_mean = (0..n)
        .map(|k| (matched[k] as f64 / total[k] as f64).ln())
        .sum::<f64>()
        / n as f64;
    let bp = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    Ok(bp * log_mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(items: &[(&str, &[&str])]) -> CaptionCorpus {
        CaptionCorpus::from_sentences(items.iter().map(|(c, r)| (*c, r.iter().copied()))).unwrap()
    }

    #[test]
    fn identity_scores_one() {
        let c = corpus(&[("a b c d e", &["x y", "a b c d e"]), ("f g h i", &["f g h i"])]);
        for n in 1..=4 {
            assert!((bleu(&c, n).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_scores_zero() {
        let c = corpus(&[("p q r", &["a b c"])]);
        assert_eq!(bleu(&c, 1).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_vector() {
        // p1 = 3/4, p2 = 2/3, p3 = 1/2, p4 = 0/1, no brevity penalty
        let c = corpus(&[("a b c d", &["a b c e", "x a b"])]);
        assert!((bleu(&c, 1).unwrap() - 0.75).abs() < 1e-15);
        assert!((bleu(&c, 2).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((bleu(&c, 3).unwrap() - 0.25f64.cbrt()).abs() < 1e-15);
        assert_eq!(bleu(&c, 4).unwrap(), 0.0);
    }

    #[test]
    fn brevity_penalty_uses_closest_shorter_on_tie() {
        // c = 2; refs of length 1 and 3 are equally close, the shorter wins, so no penalty
        let c = corpus(&[("a b", &["a", "a b c"])]);
        assert!((bleu(&c, 1).unwrap() - 1.0).abs() < 1e-15);
        // c = 2, r = 4
        let c = corpus(&[("a b", &["a b c d"])]);
        assert!((bleu(&c, 1).unwrap() - (1.0f64 - 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(bleu(&CaptionCorpus::default(), 1), Err(Error::EmptyCorpus)));
        assert!(bleu(&corpus(&[("a", &["a"])]), 5).is_err());
    }
}
