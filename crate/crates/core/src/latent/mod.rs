//! Zero-shot change detection by comparing region embeddings across time.
//!
//! Each [`Proposal`] is a footprint seen at one acquisition time, carrying an embedding of
//! the footprint in its own image (`emb_same`) and in the other image (`emb_other`). The
//! angle between those two vectors is the change score. Thresholds are angles in degrees.

mod matching;
mod proposal;
mod synth;

pub use matching::{
    bitemporal_match, filter_proposals, latent_angle, point_query, proposals_to_mask, AreaMode,
    ChangeHit, MatchParams, PointQueryResult, QueryPoint,
};
pub use proposal::{Footprint, Proposal, ProposalFile, Time};
pub use synth::{synth_proposals, SynthScene, SynthSpec};
