use serde::{Deserialize, Serialize};

use super::{Proposal, Time};
use crate::raster::ChangeMask;
use crate::{Error, Result};

/// How the area threshold is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaMode {
    /// Drop proposals covering more than `area_threshold` of the image.
    #[default]
    MaxFraction,
    /// Drop proposals covering less than `area_threshold` of the image.
    MinFraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchParams {
    /// Degrees in `[0, 180]`.
    pub change_angle_threshold: f64,
    pub stability_threshold: f64,
    #[serde(alias = "max_area_fraction")]
    pub area_threshold: f64,
    pub area_mode: AreaMode,
    pub min_area_pixels: u64,
    /// Degrees in `[0, 180]`.
    pub object_similarity_threshold: f64,
    pub top_k: Option<usize>,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            change_angle_threshold: 145.0,
            stability_threshold: 0.93,
            area_threshold: 0.9,
            area_mode: AreaMode::MaxFraction,
            min_area_pixels: 400,
            object_similarity_threshold: 60.0,
            top_k: None,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidArgument(what.to_string()))
            }
        };
        check(
            (0.0..=180.0).contains(&self.change_angle_threshold),
            "change_angle_threshold must be in [0, 180]",
        )?;
        check(
            (0.0..=180.0).contains(&self.object_similarity_threshold),
            "object_similarity_threshold must be in [0, 180]",
        )?;
        check(
            (0.0..=1.0).contains(&self.stability_threshold),
            "stability_threshold must be in [0, 1]",
        )?;
        check(
            self.area_threshold > 0.0 && self.area_threshold <= 1.0,
            "area_threshold must be in (0, 1]",
        )
    }
}

/// Angle in degrees between two embeddings.
pub fn latent_angle(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Vector(format!("dimension mismatch {} vs {}", a.len(), b.len())));
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Vector("zero-norm embedding".into()));
    }
    let cos = (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Keeps stable proposals whose footprint passes the pixel and area-fraction limits.
pub fn filter_proposals(proposals: &[Proposal], params: &MatchParams) -> Vec<Proposal> {
    proposals
        .iter()
        .filter(|p| {
            let area_ok = match params.area_mode {
                AreaMode::MaxFraction => p.area_fraction <= params.area_threshold,
                AreaMode::MinFraction => p.area_fraction >= params.area_threshold,
            };
            p.stability >= params.stability_threshold
                && p.footprint.pixel_count() >= params.min_area_pixels
                && area_ok
        })
        .cloned()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChangeHit<'a> {
    pub proposal: &'a Proposal,
    pub change_angle: f64,
}

impl ChangeHit<'_> {
    pub fn key(&self) -> (Time, u32) {
        self.proposal.key()
    }
}

fn canonical(hits: &mut [ChangeHit<'_>]) {
    hits.sort_by_key(|h| h.key());
}

fn score_all<'a>(proposals: impl Iterator<Item = &'a Proposal>) -> Result<Vec<ChangeHit<'a>>> {
    proposals
        .map(|p| {
            Ok(ChangeHit {
                proposal: p,
                change_angle: latent_angle(&p.emb_same, &p.emb_other)?,
            })
        })
        .collect()
}

fn select<'a>(mut scored: Vec<ChangeHit<'a>>, params: &MatchParams) -> Vec<ChangeHit<'a>> {
    match params.top_k {
        Some(k) => {
            scored.sort_by(|a, b| {
                b.change_angle
                    .total_cmp(&a.change_angle)
                    .then(a.key().cmp(&b.key()))
            });
            scored.truncate(k);
        }
        None => scored.retain(|h| h.change_angle >= params.change_angle_threshold),
    }
    canonical(&mut scored);
    scored
}

/// Scores every proposal of both times by its cross-time angle and keeps those above the
/// change threshold (or the `top_k` largest). Output is ordered by `(time, id)`, so the
/// result does not depend on which list is passed first.
pub fn bitemporal_match<'a>(
    first: &'a [Proposal],
    second: &'a [Proposal],
    params: &MatchParams,
) -> Result<Vec<ChangeHit<'a>>> {
    let scored = score_all(first.iter().chain(second))?;
    Ok(select(scored, params))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPoint {
    pub row: u32,
    pub col: u32,
    pub time: Time,
}

#[derive(Clone, Debug)]
pub struct PointQueryResult<'a> {
    /// Mean of the unit-normalised seed embeddings.
    pub query: Vec<f64>,
    pub seeds: Vec<&'a Proposal>,
    /// Proposals of either time whose own embedding is within the similarity threshold.
    pub category: Vec<ChangeHit<'a>>,
    /// Category members whose change angle passes the change threshold.
    pub changes: Vec<ChangeHit<'a>>,
}

fn unit(v: &[f32]) -> Vec<f64> {
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    v.iter().map(|&x| x as f64 / norm).collect()
}

fn angle_f64(a: &[f64], b: &[f32]) -> Result<f64> {
    let a32: Vec<f32> = a.iter().map(|&x| x as f32).collect();
    latent_angle(&a32, b)
}

/// Object-centric change search seeded by clicked points.
///
/// Seeds are proposals of a point's own time whose footprint contains it. Their
/// normalised embeddings are averaged into a query; every proposal within
/// `object_similarity_threshold` degrees of the query forms the category, and category
/// members passing the change threshold are returned as changes.
pub fn point_query<'a>(
    points: &[QueryPoint],
    first: &'a [Proposal],
    second: &'a [Proposal],
    dims: (u32, u32),
    params: &MatchParams,
) -> Result<PointQueryResult<'a>> {
    let (width, height) = dims;
    if points.is_empty() {
        return Err(Error::InvalidArgument("point query needs at least one point".into()));
    }
    for p in points {
        if p.row >= height || p.col >= width {
            return Err(Error::PointOutOfBounds { row: p.row, col: p.col, width, height });
        }
    }

    let all: Vec<&Proposal> = first.iter().chain(second).collect();
    let mut seeds: Vec<&Proposal> = all
        .iter()
        .copied()
        .filter(|prop| {
            points
                .iter()
                .any(|pt| pt.time == prop.time && prop.footprint.contains(pt.row, pt.col, width))
        })
        .collect();
    if seeds.is_empty() {
        return Err(Error::NoSeedProposal);
    }
    seeds.sort_by_key(|p| p.key());

    let dim = seeds[0].emb_same.len();
    let mut query = vec![0.0f64; dim];
    for s in &seeds {
        if s.emb_same.len() != dim {
            return Err(Error::Vector("seed embeddings differ in dimension".into()));
        }
        for (q, x) in query.iter_mut().zip(unit(&s.emb_same)) {
            *q += x;
        }
    }
    for q in query.iter_mut() {
        *q /= seeds.len() as f64;
    }

    let mut category = Vec::new();
    for prop in all {
        if angle_f64(&query, &prop.emb_same)? <= params.object_similarity_threshold {
            category.push(ChangeHit {
                proposal: prop,
                change_angle: latent_angle(&prop.emb_same, &prop.emb_other)?,
            });
        }
    }
    canonical(&mut category);
    let changes = category
        .iter()
        .copied()
        .filter(|h| h.change_angle >= params.change_angle_threshold)
        .collect();
    Ok(PointQueryResult { query, seeds, category, changes })
}

/// Pixel-wise union of the footprints.
pub fn proposals_to_mask<'a>(
    proposals: impl IntoIterator<Item = &'a Proposal>,
    width: u32,
    height: u32,
) -> Result<ChangeMask> {
    let mut mask = ChangeMask::empty(width, height)?;
    for p in proposals {
        p.footprint.paint(&mut mask)?;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::Footprint;

    fn prop(id: u32, time: Time, same: Vec<f32>, other: Vec<f32>) -> Proposal {
        Proposal {
            id,
            time,
            footprint: Footprint::from_runs(vec![0, 1, 15]),
            area_fraction: 1.0 / 16.0,
            stability: 0.99,
            emb_same: same,
            emb_other: other,
        }
    }

    fn at_angle(deg: f64) -> Vec<f32> {
        let r = deg.to_radians();
        vec![r.cos() as f32, r.sin() as f32, 0.0]
    }

    #[test]
    fn angle_examples() {
        let e = vec![0.3f32, -1.2, 2.0];
        let scaled: Vec<f32> = e.iter().map(|x| 3.0 * x).collect();
        let neg: Vec<f32> = e.iter().map(|x| -x).collect();
        assert!(latent_angle(&e, &scaled).unwrap().abs() < 1e-3);
        assert!((latent_angle(&e, &neg).unwrap() - 180.0).abs() < 1e-3);
        assert!((latent_angle(&[1.0, 0.0], &[0.0, 2.0]).unwrap() - 90.0).abs() < 1e-12);
        assert!(latent_angle(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(latent_angle(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn filter_examples() {
        let mut p = prop(0, Time::T1, at_angle(0.0), at_angle(0.0));
        p.footprint = Footprint::from_runs(vec![0, 500, 100]);
        let params = MatchParams::default();
        let low = Proposal { stability: 0.92, ..p.clone() };
        assert!(filter_proposals(&[low], &params).is_empty());
        let big = Proposal { area_fraction: 0.95, ..p.clone() };
        assert!(filter_proposals(&[big.clone()], &params).is_empty());
        let min_mode = MatchParams { area_mode: AreaMode::MinFraction, ..params.clone() };
        assert_eq!(filter_proposals(&[big], &min_mode).len(), 1);
        let small = Proposal { footprint: Footprint::from_runs(vec![0, 10, 590]), ..p.clone() };
        assert!(filter_proposals(&[small.clone()], &params).is_empty());

        let open = MatchParams {
            stability_threshold: 0.0,
            min_area_pixels: 0,
            area_threshold: 1.0,
            ..params
        };
        let all = vec![p, small, Proposal { stability: 0.0, area_fraction: 1.0, ..prop(9, Time::T2, at_angle(0.0), at_angle(0.0)) }];
        assert_eq!(filter_proposals(&all, &open), all);
    }

    #[test]
    fn unchanged_proposals_never_match() {
        let ps: Vec<_> = (0..5).map(|i| prop(i, Time::T1, at_angle(i as f64), at_angle(i as f64))).collect();
        let params = MatchParams { change_angle_threshold: 0.5, ..Default::default() };
        assert!(bitemporal_match(&ps, &[], &params).unwrap().is_empty());
    }

    #[test]
    fn top_k_ignores_threshold() {
        let ps: Vec<_> = (0..10)
            .map(|i| prop(i, Time::T1, at_angle(0.0), at_angle(10.0 * i as f64 + 5.0)))
            .collect();
        let params = MatchParams { top_k: Some(3), change_angle_threshold: 179.0, ..Default::default() };
        let hits = bitemporal_match(&ps, &[], &params).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.proposal.id).collect();
        assert_eq!(ids, vec![7, 8, 9]);
    }

    #[test]
    fn order_of_inputs_does_not_matter() {
        let a: Vec<_> = (0..4).map(|i| prop(i, Time::T1, at_angle(0.0), at_angle(40.0 * i as f64))).collect();
        let b: Vec<_> = (0..4).map(|i| prop(i, Time::T2, at_angle(0.0), at_angle(50.0 * i as f64))).collect();
        let params = MatchParams { change_angle_threshold: 100.0, ..Default::default() };
        let x: Vec<_> = bitemporal_match(&a, &b, &params).unwrap().iter().map(|h| h.key()).collect();
        let y: Vec<_> = bitemporal_match(&b, &a, &params).unwrap().iter().map(|h| h.key()).collect();
        assert_eq!(x, y);
        assert_eq!(x, vec![(Time::T1, 3), (Time::T2, 2), (Time::T2, 3)]);
    }

    #[test]
    fn point_inside_single_proposal_finds_itself() {
        let ps = vec![prop(0, Time::T1, at_angle(0.0), at_angle(170.0))];
        let params = MatchParams { object_similarity_threshold: 0.0, ..Default::default() };
        let q = [QueryPoint { row: 0, col: 0, time: Time::T1 }];
        let res = point_query(&q, &ps, &[], (4, 4), &params).unwrap();
        assert_eq!(res.category.len(), 1);
        assert_eq!(res.changes.len(), 1);
    }

    #[test]
    fn point_errors() {
        let ps = vec![prop(0, Time::T1, at_angle(0.0), at_angle(170.0))];
        let params = MatchParams::default();
        let miss = [QueryPoint { row: 3, col: 3, time: Time::T1 }];
        assert!(matches!(point_query(&miss, &ps, &[], (4, 4), &params), Err(Error::NoSeedProposal)));
        let wrong_time = [QueryPoint { row: 0, col: 0, time: Time::T2 }];
        assert!(matches!(point_query(&wrong_time, &ps, &[], (4, 4), &params), Err(Error::NoSeedProposal)));
        let out = [QueryPoint { row: 4, col: 0, time: Time::T1 }];
        assert!(matches!(
            point_query(&out, &ps, &[], (4, 4), &params),
            Err(Error::PointOutOfBounds { .. })
        ));
        assert!(point_query(&[], &ps, &[], (4, 4), &params).is_err());
    }

    #[test]
    fn mask_union() {
        assert!(proposals_to_mask([], 4, 4).unwrap().is_empty());
        let mut a = prop(0, Time::T1, at_angle(0.0), at_angle(0.0));
        let mut b = a.clone();
        a.footprint = Footprint::from_runs(vec![0, 10, 90]);
        b.footprint = Footprint::from_runs(vec![30, 20, 50]);
        assert_eq!(proposals_to_mask([&a, &b], 10, 10).unwrap().count(), 30);
        b.footprint = Footprint::from_runs(vec![5, 20, 75]);
        // overlap of 5 pixels counted once
        assert_eq!(proposals_to_mask([&a, &b], 10, 10).unwrap().count(), 25);
        assert!(proposals_to_mask([&a], 5, 5).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(MatchParams::default().validate().is_ok());
        assert!(MatchParams { change_angle_threshold: 200.0, ..Default::default() }.validate().is_err());
        assert!(MatchParams { area_threshold: 0.0, ..Default::default() }.validate().is_err());
    }
}
