//! Caption and segmentation metrics.
//!
//! Caption metrics work on a [`CaptionCorpus`] of tokenised candidates and references.
//! METEOR is the reduced `meteor_lite` variant: exact and stem matches only, no synonym
//! tables. CIDEr-D is reported on the conventional x10 scale.

mod bleu;
mod cider;
mod confusion;
mod corpus;
mod meteor;
mod rouge;

pub use bleu::bleu;
pub use cider::{cider_d, CIDER_SIGMA};
pub use confusion::{accumulate, miou, ConfusionMatrix, IouScores};
pub use corpus::{ngrams, tokenize, CaptionCorpus, CaptionItem};
pub use meteor::{meteor_lite, stem};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};

use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionScores {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub meteor_lite: f64,
    pub rouge_l: f64,
    pub cider_d: f64,
}

/// Scores a corpus with every caption metric. CIDEr-D needs at least two items.
pub fn evaluate_captions(corpus: &CaptionCorpus) -> Result<CaptionScores> {
    Ok(CaptionScores {
        bleu1: bleu(corpus, 1)?,
        bleu2: bleu(corpus, 2)?,
        bleu3: bleu(corpus, 3)?,
        bleu4: bleu(corpus, 4)?,
        meteor_lite: meteor_lite(corpus)?,
        rouge_l: rouge_l(corpus)?,
        cider_d: cider_d(corpus)?,
    })
}
