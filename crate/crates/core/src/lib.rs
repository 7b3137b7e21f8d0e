//! Core analytics for bi-temporal forest change interpretation.
//!
//! The crate is organised by concern:
//!
//! - [`raster`]: binary change masks, connected patches, overlays and a classical
//!   differencing detector.
//! - [`caption`]: rule-based caption synthesis from mask features.
//! - [`metrics`]: BLEU, METEOR-lite, ROUGE-L, CIDEr-D and confusion-matrix mIoU.
//! - [`latent`]: zero-shot change detection by comparing proposal embeddings across time.
//! - [`mtl`]: loss balancing and gradient surgery strategies plus a small two-task trainer.
//! - [`dataset`]: LEVIR-MCI style directory ingestion, filtering, splits and statistics.
//!
//! Every public operation is a pure function of its inputs (and an explicit seed where
//! randomness is involved), so everything here is safe to call from multiple threads.

pub mod caption;
pub mod dataset;
pub mod error;
pub mod latent;
pub mod metrics;
pub mod mtl;
pub mod raster;

pub use error::{Error, Result};
