use serde::{Deserialize, Serialize};

use crate::raster::{
    connected_patches, patch_statistics, spatial_distribution, ChangeMask, Connectivity,
    SpatialDistribution,
};
use crate::Result;

/// Ordered severity ladder for the changed-area fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    No,
    Minimal,
    Slight,
    Minor,
    Modest,
    Moderate,
    Considerable,
    Extensive,
}

impl Severity {
    pub const LADDER: [Severity; 8] = [
        Severity::No,
        Severity::Minimal,
        Severity::Slight,
        Severity::Minor,
        Severity::Modest,
        Severity::Moderate,
        Severity::Considerable,
        Severity::Extensive,
    ];

    /// Lower bounds (inclusive) of each bin above `No` and `Minimal`.
    const EDGES: [(f64, Severity); 6] = [
        (0.01, Severity::Slight),
        (0.03, Severity::Minor),
        (0.06, Severity::Modest),
        (0.12, Severity::Moderate),
        (0.20, Severity::Considerable),
        (0.35, Severity::Extensive),
    ];

    pub fn from_fraction(fraction: f64) -> Severity {
        if fraction <= 0.0 {
            return Severity::No;
        }
        Self::EDGES
            .iter()
            .rev()
            .find(|(lo, _)| fraction >= *lo)
            .map_or(Severity::Minimal, |&(_, s)| s)
    }

    pub fn adjective(self) -> &'static str {
        match self {
            Severity::No => "no",
            Severity::Minimal => "minimal",
            Severity::Slight => "slight",
            Severity::Minor => "minor",
            Severity::Modest => "modest",
            Severity::Moderate => "moderate",
            Severity::Considerable => "considerable",
            Severity::Extensive => "extensive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeVariation {
    Similar,
    Some,
    Large,
    High,
}

impl SizeVariation {
    pub fn from_cv(cv: f64) -> SizeVariation {
        match cv {
            cv if cv < 0.3 => SizeVariation::Similar,
            cv if cv < 0.7 => SizeVariation::Some,
            cv if cv < 1.2 => SizeVariation::Large,
            _ => SizeVariation::High,
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            SizeVariation::Similar => "similar in size",
            SizeVariation::Some => "showing some variation in size",
            SizeVariation::Large => "displaying large variations in size",
            SizeVariation::High => "highly varied in size",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchCountBin {
    None,
    Single,
    Few,
    Many,
}

impl PatchCountBin {
    pub fn from_count(count: usize) -> PatchCountBin {
        match count {
            0 => PatchCountBin::None,
            1 => PatchCountBin::Single,
            2..=4 => PatchCountBin::Few,
            _ => PatchCountBin::Many,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionFeatures {
    pub severity: Severity,
    pub change_fraction: f64,
    pub patch_count: usize,
    pub size_variation: SizeVariation,
    pub location: SpatialDistribution,
}

impl CaptionFeatures {
    pub fn patch_bin(&self) -> PatchCountBin {
        PatchCountBin::from_count(self.patch_count)
    }
}

/// Severity, patch count, size variation and location of the change in `mask`.
///
/// Fails only when the mask is too small for a 3x3 location grid.
pub fn extract_features(mask: &ChangeMask) -> Result<CaptionFeatures> {
    let patches = connected_patches(mask, Connectivity::default());
    let stats = patch_statistics(&patches);
    let location = spatial_distribution(&patches, mask.width(), mask.height())?;
    let change_fraction = mask.change_fraction();
    Ok(CaptionFeatures {
        severity: Severity::from_fraction(change_fraction),
        change_fraction,
        patch_count: stats.count,
        size_variation: SizeVariation::from_cv(stats.coefficient_of_variation),
        location,
    })
}
