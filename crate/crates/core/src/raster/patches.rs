use std::fmt;

use serde::{Deserialize, Serialize};

use super::ChangeMask;
use crate::{Error, Result};

/// Minimum share of change pixels a grid cell needs to be called a concentration.
pub const CONCENTRATION_SHARE: f64 = 0.25;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_neighbours(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            other => Err(Error::InvalidArgument(format!("connectivity must be 4 or 8, got {other}"))),
        }
    }

    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Self::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Self::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)],
        }
    }
}

/// A maximal connected group of change pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub id: usize,
    pub area: usize,
    /// `(min_row, min_col, max_row, max_col)`, inclusive.
    pub bbox: (u32, u32, u32, u32),
    /// `(row, col)` mean pixel position.
    pub centroid: (f64, f64),
}

/// Labels connected change regions.
///
/// Output is sorted by descending area, then by the top-left corner of the bounding box,
/// then by the first pixel in raster order, and ids are assigned after sorting.
pub fn connected_patches(mask: &ChangeMask, connectivity: Connectivity) -> Vec<Patch> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut found: Vec<(usize, Patch)> = Vec::new();

    for start in 0..w * h {
        if seen[start] || mask.bits()[start] == 0 {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut area, mut sum_r, mut sum_c) = (0usize, 0u64, 0u64);
        let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);

        while let Some(idx) = stack.pop() {
            let (r, c) = (idx / w, idx % w);
            area += 1;
            sum_r += r as u64;
            sum_c += c as u64;
            r0 = r0.min(r);
            c0 = c0.min(c);
            r1 = r1.max(r);
            c1 = c1.max(c);
            for &(dr, dc) in connectivity.offsets() {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                    continue;
                }
                let n = nr as usize * w + nc as usize;
                if !seen[n] && mask.bits()[n] != 0 {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }

        found.push((
            start,
            Patch {
                id: 0,
                area,
                bbox: (r0 as u32, c0 as u32, r1 as u32, c1 as u32),
                centroid: (sum_r as f64 / area as f64, sum_c as f64 / area as f64),
            },
        ));
    }

    found.sort_by(|(sa, a), (sb, b)| {
        b.area
            .cmp(&a.area)
            .then((a.bbox.0, a.bbox.1).cmp(&(b.bbox.0, b.bbox.1)))
            .then(sa.cmp(sb))
    });
    found
        .into_iter()
        .enumerate()
        .map(|(id, (_, p))| Patch { id, ..p })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PatchStatistics {
    pub count: usize,
    pub mean_area: f64,
    /// Population standard deviation.
    pub std_area: f64,
    pub coefficient_of_variation: f64,
}

pub fn patch_statistics(patches: &[Patch]) -> PatchStatistics {
    let count = patches.len();
    if count == 0 {
        return PatchStatistics::default();
    }
    let n = count as f64;
    let mean = patches.iter().map(|p| p.area as f64).sum::<f64>() / n;
    let var = patches
        .iter()
        .map(|p| (p.area as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    let cv = if count <= 1 || mean == 0.0 { 0.0 } else { std / mean };
    PatchStatistics {
        count,
        mean_area: mean,
        std_area: std,
        coefficient_of_variation: cv,
    }
}

/// One cell of the 3x3 location grid, in row-major order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridCell {
    TopLeft,
    TopCenter,
    TopRight,
    CenterLeft,
    Center,
    CenterRight,
    BottomLeft,
    BottomCenter,
    BottomRight,
}

impl GridCell {
    pub const ALL: [GridCell; 9] = [
        GridCell::TopLeft,
        GridCell::TopCenter,
        GridCell::TopRight,
        GridCell::CenterLeft,
        GridCell::Center,
        GridCell::CenterRight,
        GridCell::BottomLeft,
        GridCell::BottomCenter,
        GridCell::BottomRight,
    ];

    pub fn from_index(idx: usize) -> GridCell {
        Self::ALL[idx]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            GridCell::TopLeft => "top-left",
            GridCell::TopCenter => "top-center",
            GridCell::TopRight => "top-right",
            GridCell::CenterLeft => "center-left",
            GridCell::Center => "center",
            GridCell::CenterRight => "center-right",
            GridCell::BottomLeft => "bottom-left",
            GridCell::BottomCenter => "bottom-center",
            GridCell::BottomRight => "bottom-right",
        }
    }

    pub fn from_name(name: &str) -> Option<GridCell> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "cells", rename_all = "snake_case")]
pub enum SpatialPattern {
    /// No change pixels at all.
    Empty,
    /// Cells holding at least a quarter of the change, largest share first.
    Concentrated(Vec<GridCell>),
    Scattered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialDistribution {
    /// Change-pixel share per cell, indexed by [`GridCell::index`].
    pub shares: [f64; 9],
    pub pattern: SpatialPattern,
}

impl SpatialDistribution {
    pub fn share(&self, cell: GridCell) -> f64 {
        self.shares[cell.index()]
    }

    pub fn occupied(&self) -> usize {
        self.shares.iter().filter(|&&s| s > 0.0).count()
    }
}

/// Credits each patch's area to the 3x3 grid cell containing its centroid.
pub fn spatial_distribution(patches: &[Patch], width: u32, height: u32) -> Result<SpatialDistribution> {
    if width < 3 || height < 3 {
        return Err(Error::GridTooSmall { width, height });
    }
    let mut areas = [0usize; 9];
    for p in patches {
        let row = ((p.centroid.0 * 3.0 / height as f64).floor() as usize).min(2);
        let col = ((p.centroid.1 * 3.0 / width as f64).floor() as usize).min(2);
        areas[row * 3 + col] += p.area;
    }
    let total: usize = areas.iter().sum();
    if total == 0 {
        return Ok(SpatialDistribution {
            shares: [0.0; 9],
            pattern: SpatialPattern::Empty,
        });
    }
    let shares = areas.map(|a| a as f64 / total as f64);

    // share >= 1/4 decided on integer counts
    let mut hot: Vec<usize> = (0..9).filter(|&i| areas[i] * 4 >= total).collect();
    hot.sort_by(|&a, &b| areas[b].cmp(&areas[a]).then(a.cmp(&b)));
    let pattern = if hot.is_empty() {
        SpatialPattern::Scattered
    } else {
        SpatialPattern::Concentrated(hot.into_iter().map(GridCell::from_index).collect())
    };
    Ok(SpatialDistribution { shares, pattern })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> ChangeMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        let bits = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| (b == b'#') as u8))
            .collect();
        ChangeMask::from_bits(w, h, bits).unwrap()
    }

    fn patch_at(area: usize, row: f64, col: f64) -> Patch {
        Patch {
            id: 0,
            area,
            bbox: (row as u32, col as u32, row as u32, col as u32),
            centroid: (row, col),
        }
    }

    #[test]
    fn solid_block_is_one_patch() {
        let m = mask(&["....", ".###", ".###", ".###"]);
        let p = connected_patches(&m, Connectivity::Eight);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].area, 9);
        assert_eq!(p[0].bbox, (1, 1, 3, 3));
        assert_eq!(p[0].centroid, (2.0, 2.0));
    }

    #[test]
    fn diagonal_touch_depends_on_connectivity() {
        let m = mask(&["#.", ".#"]);
        assert_eq!(connected_patches(&m, Connectivity::Eight).len(), 1);
        assert_eq!(connected_patches(&m, Connectivity::Four).len(), 2);
    }

    #[test]
    fn empty_mask_has_no_patches() {
        let m = ChangeMask::empty(5, 5).unwrap();
        assert!(connected_patches(&m, Connectivity::default()).is_empty());
    }

    #[test]
    fn ordering_is_area_then_corner() {
        let m = mask(&["#..##", "#....", "...#.", "....."]);
        let p = connected_patches(&m, Connectivity::Four);
        let summary: Vec<_> = p.iter().map(|p| (p.id, p.area, p.bbox.0, p.bbox.1)).collect();
        assert_eq!(summary, vec![(0, 2, 0, 0), (1, 2, 0, 3), (2, 1, 2, 3)]);
    }

    #[test]
    fn statistics_examples() {
        let same: Vec<_> = (0..3).map(|_| patch_at(10, 0.0, 0.0)).collect();
        let s = patch_statistics(&same);
        assert_eq!((s.count, s.mean_area, s.std_area, s.coefficient_of_variation), (3, 10.0, 0.0, 0.0));

        assert_eq!(patch_statistics(&[]), PatchStatistics::default());

        let s = patch_statistics(&[patch_at(4, 0.0, 0.0), patch_at(16, 0.0, 0.0)]);
        assert_eq!(s.mean_area, 10.0);
        assert_eq!(s.std_area, 6.0);
        assert!((s.coefficient_of_variation - 0.6).abs() < 1e-15);

        let s = patch_statistics(&[patch_at(7, 0.0, 0.0)]);
        assert_eq!(s.coefficient_of_variation, 0.0);
    }

    #[test]
    fn single_patch_is_concentrated_in_its_cell() {
        let d = spatial_distribution(&[patch_at(30, 10.0, 10.0)], 256, 256).unwrap();
        assert_eq!(d.share(GridCell::TopLeft), 1.0);
        assert_eq!(d.pattern, SpatialPattern::Concentrated(vec![GridCell::TopLeft]));
    }

    #[test]
    fn nine_equal_patches_are_scattered() {
        let patches: Vec<_> = (0..9)
            .map(|i| patch_at(5, (i / 3) as f64 * 90.0 + 20.0, (i % 3) as f64 * 90.0 + 20.0))
            .collect();
        let d = spatial_distribution(&patches, 256, 256).unwrap();
        for s in d.shares {
            assert!((s - 1.0 / 9.0).abs() < 1e-15);
        }
        assert_eq!(d.pattern, SpatialPattern::Scattered);
    }

    #[test]
    fn two_hot_cells_in_share_order() {
        // top-left 50, top-center 30, rest 20 spread over 4 cells (5 each)
        let patches = vec![
            patch_at(30, 10.0, 120.0),
            patch_at(50, 10.0, 10.0),
            patch_at(5, 120.0, 10.0),
            patch_at(5, 120.0, 120.0),
            patch_at(5, 200.0, 200.0),
            patch_at(5, 200.0, 10.0),
        ];
        let d = spatial_distribution(&patches, 256, 256).unwrap();
        assert_eq!(d.share(GridCell::TopLeft), 0.5);
        assert_eq!(d.share(GridCell::TopCenter), 0.3);
        assert_eq!(
            d.pattern,
            SpatialPattern::Concentrated(vec![GridCell::TopLeft, GridCell::TopCenter])
        );
    }

    #[test]
    fn tiny_grid_is_an_error() {
        assert!(matches!(
            spatial_distribution(&[], 2, 10),
            Err(Error::GridTooSmall { .. })
        ));
        let d = spatial_distribution(&[], 3, 3).unwrap();
        assert_eq!(d.pattern, SpatialPattern::Empty);
    }

    #[test]
    fn cell_names_round_trip() {
        for c in GridCell::ALL {
            assert_eq!(GridCell::from_name(c.name()), Some(c));
        }
    }
}
