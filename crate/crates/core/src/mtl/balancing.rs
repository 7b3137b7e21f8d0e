use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Current per-task losses plus the two most recent completed epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskLosses {
    values: Vec<f64>,
    history: VecDeque<Vec<f64>>,
}

impl TaskLosses {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values)?;
        Ok(Self { values, history: VecDeque::with_capacity(2) })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Oldest first, at most two entries.
    pub fn history(&self) -> impl Iterator<Item = &[f64]> {
        self.history.iter().map(Vec::as_slice)
    }

    pub fn set(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} task losses, got {}",
                self.values.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        self.values = values;
        Ok(())
    }

    /// Closes the current epoch, pushing its values into the history ring.
    pub fn end_epoch(&mut self) {
        if self.history.len() == 2 {
            self.history.pop_front();
        }
        self.history.push_back(self.values.clone());
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidArgument(format!("loss {i} is not finite"))),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    pub total: f64,
    pub weights: Vec<f64>,
}

/// Each loss divided by a detached copy of itself.
///
/// The value is exactly the task count; the gradient of task `i` is its own gradient
/// scaled by `1 / L_i`.
pub fn normalized_total(losses: &[f64]) -> Result<Weighted> {
    let mut total = 0.0;
    let mut weights = Vec::with_capacity(losses.len());
    for (task, &l) in losses.iter().enumerate() {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::NonPositiveLoss { task, value: l });
        }
        total += l / l;
        weights.push(1.0 / l);
    }
    Ok(Weighted { total, weights })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTotal {
    pub total: f64,
    /// Derivative of the total with respect to each log-variance.
    pub grad_log_vars: Vec<f64>,
    /// Factor applied to each task gradient, `exp(-s_i)`.
    pub scales: Vec<f64>,
}

/// `Σ exp(-s_i)·L_i + s_i`.
pub fn uncertainty_total(losses: &[f64], log_vars: &[f64]) -> Result<UncertaintyTotal> {
    if losses.len() != log_vars.len() {
        return Err(Error::InvalidArgument(format!(
            "{} losses but {} log-variances",
            losses.len(),
            log_vars.len()
        )));
    }
    if let Some(i) = log_vars.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("log-variance {i} is not finite")));
    }
    let scales: Vec<f64> = log_vars.iter().map(|s| (-s).exp()).collect();
    let total = losses.iter().zip(&scales).zip(log_vars).map(|((l, e), s)| e * l + s).sum();
    let grad_log_vars = losses.iter().zip(&scales).map(|(l, e)| 1.0 - e * l).collect();
    Ok(UncertaintyTotal { total, grad_log_vars, scales })
}

/// Dynamic weight averaging: `N·softmax(r / T)` with `r_i = L_i(t-1) / L_i(t-2)`.
///
/// Falls back to unit weights until two epochs of history exist.
pub fn dwa_weights(losses: &TaskLosses, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dwa temperature must be positive, got {temperature}"
        )));
    }
    let n = losses.len();
    if losses.history.len() < 2 {
        return Ok(vec![1.0; n]);
    }
    let (older, newer) = (&losses.history[0], &losses.history[1]);
    let mut ratios = Vec::with_capacity(n);
    for (task, (&a, &b)) in newer.iter().zip(older).enumerate() {
        if b == 0.0 {
            return Err(Error::NonPositiveLoss { task, value: b });
        }
        ratios.push(a / b / temperature);
    }
    let peak = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = ratios.iter().map(|r| (r - peak).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| n as f64 * e / sum).collect())
}
