use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-task gradients over a shared parameter block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    grads: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn new(grads: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = grads.first() else {
            return Err(Error::Empty("gradient set"));
        };
        let dim = first.len();
        for (i, g) in grads.iter().enumerate() {
            if g.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "gradient {i} has length {}, expected {dim}",
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("gradient {i} has non-finite entries")));
            }
        }
        Ok(Self { grads })
    }

    pub fn tasks(&self) -> usize {
        self.grads.len()
    }

    pub fn dim(&self) -> usize {
        self.grads[0].len()
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.grads
    }

    pub fn sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for g in &self.grads {
            axpy(&mut out, 1.0, g);
        }
        out
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.tasks() as f64;
        self.sum().into_iter().map(|v| v / n).collect()
    }

    fn require_tasks(&self, min: usize) -> Result<()> {
        if self.tasks() < min {
            return Err(Error::InvalidArgument(format!(
                "need at least {min} task gradients, got {}",
                self.tasks()
            )));
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Projecting conflicting gradients.
///
/// Each task's working copy is projected off the normal plane of every other task it
/// conflicts with, visiting the others in a shuffled order.
pub fn pcgrad<R: Rng + ?Sized>(grads: &GradientSet, rng: &mut R) -> Result<Vec<f64>> {
    grads.require_tasks(2)?;
    let n = grads.tasks();
    let g = grads.grads();
    let mut out = vec![0.0; grads.dim()];
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let mut gi = g[i].clone();
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.shuffle(rng);
        for &j in &order {
            let d = dot(&gi, &g[j]);
            if d < 0.0 {
                let nn = dot(&g[j], &g[j]);
                if nn > 0.0 {
                    axpy(&mut gi, -d / nn, &g[j]);
                }
            }
        }
        axpy(&mut out, 1.0, &gi);
    }
    Ok(out)
}

/// `F(w) = g_w·g_0 + c·||g_0||·||g_w||`.
pub fn cagrad_objective(grads: &GradientSet, weights: &[f64], c: f64) -> f64 {
    let g0 = grads.mean();
    let gw = combine(grads, weights);
    dot(&gw, &g0) + c * norm(&g0) * norm(&gw)
}

fn combine(grads: &GradientSet, weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grads.dim()];
    for (g, &w) in grads.grads().iter().zip(weights) {
        axpy(&mut out, w, g);
    }
    out
}

/// Simplex weights minimising the conflict-averse objective.
pub fn cagrad_weights(grads: &GradientSet, c: f64) -> Result<Vec<f64>> {
    grads.require_tasks(2)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("cagrad c must be >= 0, got {c}")));
    }
    let n = grads.tasks();
    let g = grads.grads();
    let gram: Vec<Vec<f64>> = g.iter().map(|a| g.iter().map(|b| dot(a, b)).collect()).collect();
    // g_i·g_0 and ||g_0||² from the Gram matrix.
    let b: Vec<f64> = gram.iter().map(|row| row.iter().sum::<f64>() / n as f64).collect();
    let g0_sq = b.iter().sum::<f64>() / n as f64;
    let sqrt_phi = c * g0_sq.max(0.0).sqrt();
    let objective = |w: &[f64]| {
        let lin = dot(w, &b);
        let quad: f64 = (0..n).map(|i| w[i] * dot(&gram[i], w)).sum();
        lin + sqrt_phi * quad.max(0.0).sqrt()
    };

    if n == 2 {
        let f = |t: f64| objective(&[t, 1.0 - t]);
        let t = golden_section(f, 0.0, 1.0, 1e-9);
        let best = [0.0, t, 1.0]
            .into_iter()
            .min_by(|x, y| f(*x).total_cmp(&f(*y)))
            .unwrap_or(t);
        return Ok(vec![best, 1.0 - best]);
    }

    let scale = gram.iter().enumerate().map(|(i, r)| r[i]).fold(0.0, f64::max).max(1e-300);
    let mut w = vec![1.0 / n as f64; n];
    let mut f_w = objective(&w);
    let mut step = 1.0 / scale;
    for _ in 0..5000 {
        let gw_sq: f64 = (0..n).map(|i| w[i] * dot(&gram[i], &w)).sum();
        let gw_norm = gw_sq.max(0.0).sqrt();
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                let gi_gw = dot(&gram[i], &w);
                b[i] + if gw_norm > 0.0 { sqrt_phi * gi_gw / gw_norm } else { 0.0 }
            })
            .collect();
        let mut accepted = false;
        while step > 1e-20 / scale {
            let cand: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let cand = project_simplex(&cand);
            let f_c = objective(&cand);
            if f_c < f_w {
                let moved: f64 = cand.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
                w = cand;
                f_w = f_c;
                step *= 1.5;
                accepted = moved > 1e-14;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(w)
}

/// Conflict-averse gradient descent: `d = g_0 + (c·||g_0|| / ||g_w*||)·g_w*`.
pub fn cagrad(grads: &GradientSet, c: f64) -> Result<Vec<f64>> {
    grads.require_tasks(2)?;
    if grads.grads().iter().all(|g| g.iter().all(|&v| v == 0.0)) {
        return Err(Error::ZeroGradients);
    }
    let g0 = grads.mean();
    let w = cagrad_weights(grads, c)?;
    if c == 0.0 {
        return Ok(g0);
    }
    let gw = combine(grads, &w);
    let gw_norm = norm(&gw);
    if gw_norm <= 1e-12 * grads.grads().iter().map(|g| norm(g)).fold(0.0, f64::max) {
        return Ok(g0);
    }
    let coef = c * norm(&g0) / gw_norm;
    let mut d = g0;
    axpy(&mut d, coef, &gw);
    Ok(d)
}

/// Sign-consistency gradient dropout.
///
/// Per coordinate, keeps only the positive or only the negative task entries, choosing
/// positive with probability `(1 + S/A) / 2`.
pub fn graddrop<R: Rng + ?Sized>(grads: &GradientSet, rng: &mut R) -> Result<Vec<f64>> {
    grads.require_tasks(2)?;
    let g = grads.grads();
    let mut out = vec![0.0; grads.dim()];
    for (k, slot) in out.iter_mut().enumerate() {
        let (mut s, mut a) = (0.0, 0.0);
        for gi in g {
            s += gi[k];
            a += gi[k].abs();
        }
        let purity = if a == 0.0 { 0.5 } else { 0.5 * (1.0 + s / a) };
        let u: f64 = rng.random();
        let keep_positive = u < purity;
        *slot = g
            .iter()
            .map(|gi| gi[k])
            .filter(|&v| if keep_positive { v > 0.0 } else { v < 0.0 })
            .fold(0.0, |acc, v| acc + v);
    }
    Ok(out)
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
