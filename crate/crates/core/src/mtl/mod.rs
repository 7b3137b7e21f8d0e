//! Multi-task loss balancing and gradient surgery.
//!
//! Balancing strategies turn per-task losses into per-task gradient scales; surgery
//! strategies combine the scaled per-task gradients of a shared parameter block into a
//! single update. [`train_toy`] exercises every combination on a small two-task network
//! and [`ablation_report`] aggregates repeated runs.

mod balancing;
mod report;
mod strategy;
mod surgery;
mod toy;

pub use balancing::{dwa_weights, normalized_total, uncertainty_total, TaskLosses, UncertaintyTotal, Weighted};
pub use report::{
    ablation_report, aggregate, AblationReport, GroupRow, MetricSummary, RunResult, BALANCING_GROUP, METRICS,
    SURGERY_GROUP,
};
pub use strategy::{Balancing, StrategyConfig, Surgery};
pub use surgery::{cagrad, cagrad_objective, cagrad_weights, dot, graddrop, norm, pcgrad, GradientSet};
pub use toy::{toy_fixture, train_toy, EpochRecord, ToyConfig, ToyData, ToyHistory, ToyModel};
