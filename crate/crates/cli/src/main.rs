mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "canopy", version, about = "Forest change analysis workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score candidate captions against references.
    EvalCaptions {
        /// JSON object mapping item id to one candidate sentence.
        #[arg(long)]
        candidates: PathBuf,
        /// JSON object mapping item id to a list of reference sentences.
        #[arg(long)]
        references: PathBuf,
    },
    /// Dataset-level IoU of predicted masks against ground truth, matched by file name.
    EvalMasks {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Classical change detection on one image pair.
    Detect {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        blur_sigma: f64,
        /// Fixed distance threshold; Otsu when omitted.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 50)]
        min_area: usize,
        #[arg(long, default_value_t = 1)]
        morph_radius: u32,
    },
    /// Rule-based captions for a change mask.
    Caption {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        human: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Zero-shot change detection over a proposal file.
    Zeroshot(ZeroshotArgs),
    /// Writes a synthetic proposal file with planted changes and its ground-truth mask.
    SynthProposals {
        /// Optional JSON spec; fields left out take their defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
    },
    /// Multi-task loss balancing and gradient surgery experiments.
    MtlLab {
        #[command(subcommand)]
        command: MtlCommand,
    },
    /// Dataset ingestion utilities.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Runs the HTTP API (and the UI when a static directory is given).
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ZeroshotArgs {
    #[arg(long)]
    proposals: PathBuf,
    #[arg(long, default_value_t = 145.0)]
    change_thresh: f64,
    #[arg(long, default_value_t = 0.93)]
    stability: f64,
    #[arg(long, default_value_t = 0.9)]
    max_area: f64,
    #[arg(long, default_value_t = 60.0)]
    obj_sim: f64,
    #[arg(long)]
    top_k: Option<usize>,
    /// Point prompts as `row,col[,t1|t2]`; switches to a point query.
    #[arg(long, num_args = 1..)]
    points: Vec<String>,
    #[arg(long)]
    out_mask: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MtlCommand {
    /// Trains every configured strategy and writes histories plus the ablation table.
    Run {
        /// JSON config; the full 3 x 4 grid with default settings when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Keeps examples whose captions mention trees and prints the new split sizes.
    FilterTrees {
        #[arg(long)]
        root: PathBuf,
        /// Writes the kept ids per split as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Change-fraction statistics and per-channel normalisation constants.
    Stats {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        split: Option<String>,
    },
    /// Seeded train/val/test assignment over all examples.
    Split {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
        ratios: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    commands::run(cli.command)
}
