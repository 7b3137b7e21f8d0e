use super::CaptionCorpus;
use crate::Result;

pub const ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f_score(cand: &[String], reference: &[String]) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(cand, reference) as f64;
    let r = lcs / reference.len() as f64;
    let p = lcs / cand.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    if r + p == 0.0 {
        0.0
    } else {
        (1.0 + b2) * r * p / (r + b2 * p)
    }
}

/// ROUGE-L F-measure, best reference per item, averaged over items.
pub fn rouge_l(corpus: &CaptionCorpus) -> Result<f64> {
    let items = corpus.non_empty()?;
    let total: f64 = items
        .iter()
        .map(|it| {
            it.references
                .iter()
                .map(|r| f_score(&it.candidate, r))
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(c: &str, r: &str) -> f64 {
        rouge_l(&CaptionCorpus::from_sentences([(c, [r])]).unwrap()).unwrap()
    }

    #[test]
    fn examples() {
        assert!((score("a b c", "a b c") - 1.0).abs() < 1e-15);
        assert_eq!(score("a b c", "x y z"), 0.0);
        // R = P = 2/3 gives F = 2/3 for any beta
        assert!((score("a b c", "a c b") - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lcs_basics() {
        assert_eq!(lcs_len(&[1, 2, 3, 4], &[2, 4, 3]), 2);
        assert_eq!(lcs_len::<u8>(&[], &[1]), 0);
    }
}
