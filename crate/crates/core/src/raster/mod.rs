//! Binary change masks and the analytics built on them.

mod detect;
mod mask;
mod overlay;
mod patches;

pub use detect::{difference_mask, otsu_threshold, DetectConfig, ThresholdMode};
pub use mask::{change_fraction, BitemporalPair, ChangeMask};
pub use overlay::{overlay, FALSE_NEGATIVE, FALSE_POSITIVE, TRUE_POSITIVE};
pub use patches::{
    connected_patches, patch_statistics, spatial_distribution, Connectivity, GridCell, Patch,
    PatchStatistics, SpatialDistribution, SpatialPattern, CONCENTRATION_SHARE,
};

pub use image::RgbImage;
