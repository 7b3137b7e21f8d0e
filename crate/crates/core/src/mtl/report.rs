use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::strategy::{Balancing, StrategyConfig, Surgery};
use super::toy::{train_toy, ToyConfig, ToyHistory};
use crate::{Error, Result};

pub const METRICS: [&str; 4] = ["train_reg_loss", "train_cls_loss", "test_reg_mse", "test_cls_accuracy"];

pub const BALANCING_GROUP: &str = "Loss Balancing";
pub const SURGERY_GROUP: &str = "Gradient Conflict Resolution";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategy: StrategyConfig,
    pub run: usize,
    pub seed: u64,
    /// Values in [`METRICS`] order.
    pub metrics: Vec<f64>,
}

impl RunResult {
    pub fn from_history(history: &ToyHistory, run: usize) -> Self {
        Self {
            strategy: history.strategy.clone(),
            run,
            seed: history.seed,
            metrics: vec![
                history.final_losses[0],
                history.final_losses[1],
                history.test_reg_mse,
                history.test_cls_accuracy,
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    /// [`BALANCING_GROUP`], [`SURGERY_GROUP`] or `"Configuration"`.
    pub group: String,
    pub method: String,
    pub runs: usize,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub runs: Vec<RunResult>,
    /// One row per configuration, in input order.
    pub configurations: Vec<GroupRow>,
    /// Balancing rows first, then surgery rows; each pools every run sharing that method.
    pub groups: Vec<GroupRow>,
}

/// Trains every configuration `runs_per_config` times and aggregates the results.
///
/// Run `r` uses seed `base_seed + r` for data, initialisation and the surgery stream.
pub fn ablation_report(
    configs: &[StrategyConfig],
    runs_per_config: usize,
    toy: &ToyConfig,
    steps: usize,
    base_seed: u64,
) -> Result<(AblationReport, Vec<ToyHistory>)> {
    if runs_per_config == 0 {
        return Err(Error::InvalidArgument("runs_per_config must be at least 1".into()));
    }
    let jobs: Vec<(usize, usize)> =
        (0..configs.len()).flat_map(|c| (0..runs_per_config).map(move |r| (c, r))).collect();
    let histories = jobs
        .par_iter()
        .map(|&(c, r)| train_toy(&configs[c], toy, steps, base_seed + r as u64))
        .collect::<Result<Vec<_>>>()?;
    let runs = jobs.iter().zip(&histories).map(|(&(_, r), h)| RunResult::from_history(h, r)).collect();
    Ok((aggregate(runs), histories))
}

/// Groups finished runs the same way [`ablation_report`] does.
pub fn aggregate(runs: Vec<RunResult>) -> AblationReport {
    let row = |group: &str, method: String, picked: Vec<&RunResult>| GroupRow {
        group: group.to_string(),
        method,
        runs: picked.len(),
        metrics: (0..METRICS.len())
            .map(|m| MetricSummary::of(&picked.iter().map(|r| r.metrics[m]).collect::<Vec<_>>()))
            .collect(),
    };

    let mut seen: Vec<&StrategyConfig> = Vec::new();
    for r in &runs {
        if !seen.contains(&&r.strategy) {
            seen.push(&r.strategy);
        }
    }
    let configurations = seen
        .iter()
        .map(|s| row("Configuration", s.to_string(), runs.iter().filter(|r| &r.strategy == *s).collect()))
        .collect();

    let mut groups = Vec::new();
    for b in Balancing::ALL {
        let picked: Vec<_> = runs.iter().filter(|r| r.strategy.balancing == b).collect();
        if !picked.is_empty() {
            groups.push(row(BALANCING_GROUP, b.label().to_string(), picked));
        }
    }
    for s in Surgery::ALL {
        let picked: Vec<_> = runs.iter().filter(|r| r.strategy.surgery == s).collect();
        if !picked.is_empty() {
            groups.push(row(SURGERY_GROUP, s.label().to_string(), picked));
        }
    }
    AblationReport { runs, configurations, groups }
}

impl AblationReport {
    /// Grouped table: strategy family, method, then `mean ± std` per metric.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let header = |out: &mut String, first: &str| {
            let _ = writeln!(out, "| {first} | Method | {} |", METRICS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(METRICS.len() + 2));
        };
        header(&mut out, "MTL Strategy");
        let mut last = "";
        for g in &self.groups {
            let family = if g.group == last { "" } else { g.group.as_str() };
            last = &g.group;
            let _ = writeln!(out, "| {family} | {} | {} |", g.method, cells(&g.metrics));
        }
        out.push('\n');
        header(&mut out, "Configuration");
        for g in &self.configurations {
            let _ = writeln!(out, "| {} | runs={} | {} |", g.method, g.runs, cells(&g.metrics));
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["group".to_string(), "method".to_string(), "runs".to_string()];
        for m in METRICS {
            head.push(format!("{m}_mean"));
            head.push(format!("{m}_std"));
        }
        w.write_record(&head)?;
        for g in self.groups.iter().chain(&self.configurations) {
            let mut rec = vec![g.group.clone(), g.method.clone(), g.runs.to_string()];
            for s in &g.metrics {
                rec.push(s.mean.to_string());
                rec.push(s.std.to_string());
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn cells(metrics: &[MetricSummary]) -> String {
    metrics.iter().map(|s| format!("{:.4} ± {:.4}", s.mean, s.std)).collect::<Vec<_>>().join(" | ")
}
