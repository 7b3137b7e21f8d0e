use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use canopy_agent::{BackendConfig, ServeConfig};
use canopy_core::caption::generate_caption_set;
use canopy_core::dataset::{
    filter_tree_examples, load_index, make_splits, mask_stats, normalization_stats, Split,
};
use canopy_core::latent::{
    bitemporal_match, filter_proposals, point_query, proposals_to_mask, synth_proposals, ChangeHit,
    MatchParams, ProposalFile, QueryPoint, SynthSpec, Time,
};
use canopy_core::metrics::{accumulate, evaluate_captions, miou, CaptionCorpus, ConfusionMatrix};
use canopy_core::mtl::{ablation_report, StrategyConfig, ToyConfig};
use canopy_core::raster::{difference_mask, BitemporalPair, ChangeMask, DetectConfig, ThresholdMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Command, DatasetCommand, MtlCommand, ZeroshotArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::EvalCaptions { candidates, references } => eval_captions(&candidates, &references),
        Command::EvalMasks { pred, gt } => eval_masks(&pred, &gt),
        Command::Detect { a, b, out, blur_sigma, threshold, min_area, morph_radius } => {
            let cfg = DetectConfig {
                blur_sigma,
                threshold_mode: threshold.map_or(ThresholdMode::Otsu, ThresholdMode::Fixed),
                min_area,
                morph_radius,
            };
            detect(&a, &b, &out, &cfg)
        }
        Command::Caption { mask, human, seed } => {
            let mask = ChangeMask::load_png(&mask)?;
            print_json(&generate_caption_set(&mask, human.as_deref(), seed)?)
        }
        Command::Zeroshot(args) => zeroshot(&args),
        Command::SynthProposals { spec, seed, out, gt } => {
            let mut spec: SynthSpec = match spec {
                Some(path) => read_json(&path)?,
                None => SynthSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let scene = synth_proposals(&spec)?;
            scene.file.save(&out)?;
            if let Some(gt) = gt {
                scene.ground_truth.save_png(gt)?;
            }
            print_json(&json!({
                "proposals": scene.file.proposals.len(),
                "planted": scene.planted.len(),
                "distractors": scene.distractors.len(),
            }))
        }
        Command::MtlLab { command: MtlCommand::Run { config, runs, out } } => mtl_run(config.as_deref(), runs, &out),
        Command::Dataset { command } => dataset(command),
        Command::Serve { addr, data_dir, static_dir } => {
            let backend = BackendConfig::from_env()?.build()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(canopy_agent::serve(ServeConfig { addr, data_dir, static_dir, backend }))?;
            Ok(())
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn eval_captions(candidates: &Path, references: &Path) -> Result<()> {
    let cands: BTreeMap<String, String> = read_json(candidates)?;
    let mut refs: BTreeMap<String, Vec<String>> = read_json(references)?;
    let mut items = Vec::with_capacity(cands.len());
    for (id, cand) in cands {
        let r = refs.remove(&id).with_context(|| format!("no references for {id:?}"))?;
        items.push((cand, r));
    }
    if !refs.is_empty() {
        bail!("references without a candidate: {:?}", refs.keys().collect::<Vec<_>>());
    }
    print_json(&evaluate_captions(&CaptionCorpus::from_sentences(items)?)?)
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

fn eval_masks(pred: &Path, gt: &Path) -> Result<()> {
    let names = png_names(gt)?;
    if names.is_empty() {
        bail!("no PNG masks in {}", gt.display());
    }
    let mut cm = ConfusionMatrix::default();
    for name in &names {
        let p = ChangeMask::load_png(pred.join(name)).with_context(|| format!("prediction for {name}"))?;
        let g = ChangeMask::load_png(gt.join(name))?;
        cm = accumulate(cm, &p, &g)?;
    }
    let scores = miou(&cm);
    print_json(&json!({
        "iou_c": scores.iou_c,
        "iou_nc": scores.iou_nc,
        "miou": scores.miou,
        "images": names.len(),
    }))
}

fn load_rgb(path: &Path) -> Result<image::RgbImage> {
    Ok(image::open(path).with_context(|| format!("reading {}", path.display()))?.to_rgb8())
}

fn detect(a: &Path, b: &Path, out: &Path, cfg: &DetectConfig) -> Result<()> {
    let pair = BitemporalPair::new(load_rgb(a)?, load_rgb(b)?, None)?;
    let mask = difference_mask(&pair, cfg)?;
    mask.save_png(out)?;
    print_json(&json!({
        "width": mask.width(),
        "height": mask.height(),
        "changed_pixels": mask.count(),
        "change_fraction": mask.change_fraction(),
    }))
}

fn parse_point(s: &str) -> Result<QueryPoint> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let (row, col, time) = match parts.as_slice() {
        [r, c] => (r, c, Time::T1),
        [r, c, t] => (r, c, serde_json::from_value(Value::String(t.to_string())).context("time must be t1 or t2")?),
        _ => bail!("point {s:?} is not row,col[,t1|t2]"),
    };
    Ok(QueryPoint { row: row.parse()?, col: col.parse()?, time })
}

fn hits_json(hits: &[ChangeHit<'_>]) -> Vec<Value> {
    hits.iter()
        .map(|h| json!({"time": h.proposal.time, "id": h.proposal.id, "change_angle": h.change_angle}))
        .collect()
}

fn zeroshot(args: &ZeroshotArgs) -> Result<()> {
    let file = ProposalFile::load(&args.proposals)?;
    let params = MatchParams {
        change_angle_threshold: args.change_thresh,
        stability_threshold: args.stability,
        area_threshold: args.max_area,
        object_similarity_threshold: args.obj_sim,
        top_k: args.top_k,
        ..MatchParams::default()
    };
    params.validate()?;
    let (t1, t2) = file.split_by_time();
    let (t1, t2) = (filter_proposals(&t1, &params), filter_proposals(&t2, &params));
    let (hits, mut report) = if args.points.is_empty() {
        let hits = bitemporal_match(&t1, &t2, &params)?;
        let report = json!({"mode": "bitemporal"});
        (hits, report)
    } else {
        let points = args.points.iter().map(|p| parse_point(p)).collect::<Result<Vec<_>>>()?;
        let result = point_query(&points, &t1, &t2, (file.width, file.height), &params)?;
        let report = json!({
            "mode": "point_query",
            "points": points,
            "seeds": result.seeds.iter().map(|p| json!({"time": p.time, "id": p.id})).collect::<Vec<_>>(),
            "category": hits_json(&result.category),
        });
        (result.changes, report)
    };
    let mask = proposals_to_mask(hits.iter().map(|h| h.proposal), file.width, file.height)?;
    mask.save_png(&args.out_mask)?;
    report["params"] = serde_json::to_value(&params)?;
    report["considered"] = json!({"t1": t1.len(), "t2": t2.len()});
    report["changes"] = json!(hits_json(&hits));
    report["change_fraction"] = json!(mask.change_fraction());
    match &args.report {
        Some(path) => write_json(path, &report),
        None => print_json(&report),
    }
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct MtlConfig {
    strategies: Vec<StrategyConfig>,
    toy: ToyConfig,
    steps: usize,
    base_seed: u64,
}

impl Default for MtlConfig {
    fn default() -> Self {
        Self { strategies: StrategyConfig::grid(), toy: ToyConfig::default(), steps: 500, base_seed: 0 }
    }
}

fn mtl_run(config: Option<&Path>, runs: usize, out: &Path) -> Result<()> {
    let cfg: MtlConfig = match config {
        Some(path) => read_json(path)?,
        None => MtlConfig::default(),
    };
    let (report, histories) = ablation_report(&cfg.strategies, runs, &cfg.toy, cfg.steps, cfg.base_seed)?;
    let hist_dir = out.join("histories");
    fs::create_dir_all(&hist_dir)?;
    for h in &histories {
        let tag = |v: Value| v.as_str().unwrap_or_default().to_string();
        let name = format!(
            "{}-{}-seed{}.json",
            tag(serde_json::to_value(h.strategy.balancing)?),
            tag(serde_json::to_value(h.strategy.surgery)?),
            h.seed
        );
        write_json(&hist_dir.join(name), h)?;
    }
    fs::write(out.join("ablation.md"), report.to_markdown())?;
    fs::write(out.join("ablation.csv"), report.to_csv()?)?;
    write_json(&out.join("runs.json"), &report.runs)?;
    write!(std::io::stdout().lock(), "{}", report.to_markdown())?;
    Ok(())
}

fn dataset(command: DatasetCommand) -> Result<()> {
    match command {
        DatasetCommand::FilterTrees { root, out } => {
            let index = load_index(&root)?;
            let kept = filter_tree_examples(&index);
            let ids: BTreeMap<&str, Vec<&str>> = [Split::Train, Split::Val, Split::Test]
                .into_iter()
                .map(|s| (s.as_str(), kept.split(s).iter().map(|e| e.id.as_str()).collect()))
                .collect();
            if let Some(out) = out {
                write_json(&out, &ids)?;
            }
            let [train, val, test] = kept.sizes();
            let [all_train, all_val, all_test] = index.sizes();
            print_json(&json!({
                "kept": {"train": train, "val": val, "test": test},
                "total": {"train": all_train, "val": all_val, "test": all_test},
            }))
        }
        DatasetCommand::Stats { root, split } => {
            let index = load_index(&root)?;
            let split: Option<Split> = split.map(|s| s.parse()).transpose()?;
            let masks = mask_stats(&index, split)?;
            let norm = normalization_stats(&index, split.unwrap_or(Split::Train))?;
            print_json(&json!({
                "examples": masks.per_example.len(),
                "mean_change_percent": masks.mean * 100.0,
                "max_change_percent": masks.max * 100.0,
                "histogram": masks.histogram,
                "normalization": norm,
            }))
        }
        DatasetCommand::Split { root, seed, ratios, out } => {
            let ratios: [f64; 3] = ratios.try_into().map_err(|_| anyhow::anyhow!("--ratios needs three values"))?;
            let index = load_index(&root)?;
            let assignment = make_splits(&index, ratios, seed)?;
            if let Some(out) = out {
                write_json(&out, &assignment)?;
            }
            let [train, val, test] = assignment.sizes();
            print_json(&json!({"train": train, "val": val, "test": test, "seed": seed}))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        assert_eq!(parse_point("3, 4").unwrap(), QueryPoint { row: 3, col: 4, time: Time::T1 });
        assert_eq!(parse_point("3,4,t2").unwrap(), QueryPoint { row: 3, col: 4, time: Time::T2 });
        assert!(parse_point("3").is_err());
        assert!(parse_point("3,4,t3").is_err());
    }
}
