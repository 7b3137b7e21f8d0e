//! Rule-based change captions built from mask features.
//!
//! Severity and size-variation bins are fixed tables; sentences are assembled from a
//! closed phrase lexicon by a seeded generator, so output is reproducible per seed.

mod features;
mod grammar;
mod set;

pub use features::{extract_features, CaptionFeatures, PatchCountBin, Severity, SizeVariation};
pub use grammar::{lexicon, render_caption, NO_CHANGE_SENTENCES};
pub use set::{generate_caption_set, CaptionSet, GENERATED_PER_SET, MAX_ATTEMPTS};
