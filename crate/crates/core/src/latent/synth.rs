//! Synthetic proposal scenes with planted semantic changes.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Footprint, Proposal, ProposalFile, Time};
use crate::raster::ChangeMask;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub width: u32,
    pub height: u32,
    pub embedding_dim: usize,
    pub points_per_side: u32,
    pub clusters: usize,
    pub per_cluster: usize,
    /// Proposals per cluster whose appearance changes between the two times.
    pub planted_per_cluster: usize,
    /// Degrees; members lie within this angle of their cluster centre.
    pub angle_within: f64,
    /// Degrees between every pair of cluster centres.
    pub angle_between: f64,
    /// Degrees between `emb_same` and `emb_other` of a planted change.
    pub planted_change_angle: f64,
    /// Changed-looking proposals with stability below any sensible threshold.
    pub unstable_distractors: usize,
    /// Adds one changed-looking proposal that covers the whole image.
    pub whole_image_distractor: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            embedding_dim: 32,
            points_per_side: 16,
            clusters: 3,
            per_cluster: 8,
            planted_per_cluster: 2,
            angle_within: 10.0,
            angle_between: 90.0,
            planted_change_angle: 150.0,
            unstable_distractors: 2,
            whole_image_distractor: true,
            seed: 0,
        }
    }
}

/// Generated proposals plus the bookkeeping needed to score results against them.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub file: ProposalFile,
    pub ground_truth: ChangeMask,
    /// Cluster of each clustered proposal, keyed by `(time, id)`.
    pub cluster_of: BTreeMap<(Time, u32), usize>,
    /// `(time, id)` of every proposal whose footprint carries a planted change.
    pub planted: BTreeSet<(Time, u32)>,
    /// `(time, id)` of the distractors.
    pub distractors: BTreeSet<(Time, u32)>,
}

impl SynthScene {
    pub fn split(&self) -> (Vec<Proposal>, Vec<Proposal>) {
        self.file.split_by_time()
    }

    /// A pixel inside the t1 footprint of `id`.
    pub fn interior_point(&self, time: Time, id: u32) -> Option<(u32, u32)> {
        let p = self.file.proposals.iter().find(|p| p.key() == (time, id))?;
        let w = self.file.width;
        let mut start = 0u64;
        for (i, &r) in p.footprint.runs().iter().enumerate() {
            if i % 2 == 1 && r > 0 {
                let idx = start + r as u64 / 2;
                return Some(((idx / w as u64) as u32, (idx % w as u64) as u32));
            }
            start += r as u64;
        }
        None
    }
}

const MIN_SIDE: u32 = 22;

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random unit vector orthogonal to the unit vector `v`.
fn orthogonal(rng: &mut ChaCha8Rng, v: &[f64]) -> Vec<f64> {
    loop {
        let mut u: Vec<f64> = (0..v.len()).map(|_| rng.sample(StandardNormal)).collect();
        let d = dot(&u, v);
        u.iter_mut().zip(v).for_each(|(x, y)| *x -= d * y);
        if u.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
            normalize(&mut u);
            return u;
        }
    }
}

/// Rotates unit `v` by `deg` degrees towards a random orthogonal direction.
fn rotate(rng: &mut ChaCha8Rng, v: &[f64], deg: f64) -> Vec<f64> {
    let u = orthogonal(rng, v);
    let (s, c) = deg.to_radians().sin_cos();
    let mut out: Vec<f64> = v.iter().zip(&u).map(|(a, b)| c * a + s * b).collect();
    normalize(&mut out);
    out
}

fn cluster_centres(spec: &SynthSpec) -> Vec<Vec<f64>> {
    let d = spec.embedding_dim;
    let basis = |i: usize| {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        e
    };
    match spec.clusters {
        1 => vec![basis(0)],
        2 => {
            let (s, c) = spec.angle_between.to_radians().sin_cos();
            let mut second = vec![0.0; d];
            second[0] = c;
            second[1] = s;
            vec![basis(0), second]
        }
        k => {
            // shared axis plus one private axis each: pairwise cosine = a^2
            let a = spec.angle_between.to_radians().cos().sqrt();
            let b = (1.0 - a * a).sqrt();
            (0..k)
                .map(|i| {
                    let mut v = vec![0.0; d];
                    v[0] = a;
                    v[i + 1] = b;
                    v
                })
                .collect()
        }
    }
}

fn check(spec: &SynthSpec) -> Result<()> {
    let fail = |m: String| Err(Error::InfeasibleSpec(m));
    if spec.clusters == 0 || spec.per_cluster == 0 {
        return fail("need at least one cluster with one member".into());
    }
    if spec.planted_per_cluster > spec.per_cluster {
        return fail("more planted changes than cluster members".into());
    }
    if spec.angle_within >= spec.angle_between {
        return fail(format!(
            "angle_within {} must be below angle_between {}",
            spec.angle_within, spec.angle_between
        ));
    }
    if spec.angle_within < 0.0 || spec.angle_within >= 90.0 {
        return fail(format!("angle_within {} must be in [0, 90)", spec.angle_within));
    }
    if spec.clusters >= 3 && spec.angle_between > 90.0 {
        return fail(format!(
            "{} clusters cannot be pairwise {} degrees apart with this construction",
            spec.clusters, spec.angle_between
        ));
    }
    if spec.angle_between > 180.0 || !(0.0..=180.0).contains(&spec.planted_change_angle) {
        return fail("angles must lie in [0, 180]".into());
    }
    let needed = if spec.clusters <= 2 { 2 } else { spec.clusters + 1 };
    if spec.embedding_dim < needed {
        return fail(format!("embedding_dim must be at least {needed}"));
    }
    Ok(())
}

fn f32s(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Builds a deterministic scene for `spec`.
///
/// Every footprint yields two proposals, one per time, whose embeddings are swapped
/// copies of each other, so planted changes are visible from both sides. Footprints are
/// disjoint rectangles laid out on a grid.
pub fn synth_proposals(spec: &SynthSpec) -> Result<SynthScene> {
    check(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centres = cluster_centres(spec);

    let clustered = spec.clusters * spec.per_cluster;
    let footprints_needed = clustered + spec.unstable_distractors;
    let grid = (footprints_needed as f64).sqrt().ceil() as u32;
    let cell_w = spec.width / grid;
    let cell_h = spec.height / grid;
    if cell_w < MIN_SIDE + 2 || cell_h < MIN_SIDE + 2 {
        return Err(Error::InfeasibleSpec(format!(
            "{footprints_needed} footprints do not fit in {}x{}",
            spec.width, spec.height
        )));
    }

    let pixels = spec.width as u64 * spec.height as u64;
    let rect = |rng: &mut ChaCha8Rng, slot: usize| -> Result<Footprint> {
        let (gr, gc) = (slot as u32 / grid, slot as u32 % grid);
        let h = rng.random_range(MIN_SIDE..=cell_h - 2);
        let w = rng.random_range(MIN_SIDE..=cell_w - 2);
        let r0 = gr * cell_h + rng.random_range(0..=cell_h - h);
        let c0 = gc * cell_w + rng.random_range(0..=cell_w - w);
        Footprint::rectangle(spec.width, spec.height, r0, c0, h, w)
    };

    let mut slots: Vec<usize> = (0..footprints_needed).collect();
    // spread clusters over the image rather than filling rows in order
    for i in (1..slots.len()).rev() {
        let j = rng.random_range(0..=i);
        slots.swap(i, j);
    }

    struct Entry {
        footprint: Footprint,
        stability: f64,
        emb_t1: Vec<f64>,
        emb_t2: Vec<f64>,
        cluster: Option<usize>,
        planted: bool,
        distractor: bool,
    }
    let mut entries = Vec::new();
    let mut next_slot = slots.into_iter();

    for (k, centre) in centres.iter().enumerate() {
        for m in 0..spec.per_cluster {
            let spread = rng.random_range(0.0..=spec.angle_within);
            let emb_t1 = rotate(&mut rng, centre, spread);
            let planted = m < spec.planted_per_cluster;
            let emb_t2 = if planted {
                rotate(&mut rng, &emb_t1, spec.planted_change_angle)
            } else {
                let drift = rng.random_range(0.0..=spec.angle_within);
                rotate(&mut rng, &emb_t1, drift)
            };
            entries.push(Entry {
                footprint: rect(&mut rng, next_slot.next().unwrap())?,
                stability: rng.random_range(0.94..=1.0),
                emb_t1,
                emb_t2,
                cluster: Some(k),
                planted,
                distractor: false,
            });
        }
    }
    for _ in 0..spec.unstable_distractors {
        let k = rng.random_range(0..centres.len());
        let spread = rng.random_range(0.0..=spec.angle_within);
        let emb_t1 = rotate(&mut rng, &centres[k], spread);
        let emb_t2 = rotate(&mut rng, &emb_t1, spec.planted_change_angle);
        entries.push(Entry {
            footprint: rect(&mut rng, next_slot.next().unwrap())?,
            stability: rng.random_range(0.5..=0.9),
            emb_t1,
            emb_t2,
            cluster: None,
            planted: false,
            distractor: true,
        });
    }
    if spec.whole_image_distractor {
        let mut emb_t1 = vec![0.0; spec.embedding_dim];
        emb_t1[spec.embedding_dim - 1] = 1.0;
        let emb_t2 = rotate(&mut rng, &emb_t1, spec.planted_change_angle);
        entries.push(Entry {
            footprint: Footprint::from_runs(vec![0, pixels as u32]),
            stability: 0.99,
            emb_t1,
            emb_t2,
            cluster: None,
            planted: false,
            distractor: true,
        });
    }

    let n = entries.len() as u32;
    let mut proposals = Vec::with_capacity(entries.len() * 2);
    let mut cluster_of = BTreeMap::new();
    let mut planted = BTreeSet::new();
    let mut distractors = BTreeSet::new();
    let mut ground_truth = ChangeMask::empty(spec.width, spec.height)?;

    for (i, e) in entries.iter().enumerate() {
        let area_fraction = e.footprint.pixel_count() as f64 / pixels as f64;
        for (time, id, same, other) in [
            (Time::T1, i as u32, &e.emb_t1, &e.emb_t2),
            (Time::T2, n + i as u32, &e.emb_t2, &e.emb_t1),
        ] {
            proposals.push(Proposal {
                id,
                time,
                footprint: e.footprint.clone(),
                area_fraction,
                stability: e.stability,
                emb_same: f32s(same),
                emb_other: f32s(other),
            });
            if let Some(k) = e.cluster {
                cluster_of.insert((time, id), k);
            }
            if e.planted {
                planted.insert((time, id));
            }
            if e.distractor {
                distractors.insert((time, id));
            }
        }
        if e.planted {
            e.footprint.paint(&mut ground_truth)?;
        }
    }

    let file = ProposalFile {
        width: spec.width,
        height: spec.height,
        embedding_dim: spec.embedding_dim,
        points_per_side: spec.points_per_side,
        proposals,
    };
    file.validate()?;
    Ok(SynthScene { file, ground_truth, cluster_of, planted, distractors })
}
