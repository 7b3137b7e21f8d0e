use canopy_core::caption::generate_caption_set;
use canopy_core::latent::{bitemporal_match, filter_proposals, point_query, proposals_to_mask, MatchParams, QueryPoint, Time};
use canopy_core::metrics::{miou, ConfusionMatrix};
use canopy_core::raster::{
    connected_patches, difference_mask, overlay, patch_statistics, ChangeMask, Connectivity, DetectConfig, ThresholdMode,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::AgentError;
use crate::session::Session;
use crate::tools::{self, lookup};

/// What a tool hands back: a one-line summary for the model plus structured data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub summary: String,
    pub data: Value,
    pub artifacts: Vec<String>,
}

/// Validates `args` against the tool's schema, then runs it against the session.
pub fn execute_tool(session: &mut Session, tool: &str, args: &Value) -> Result<ToolOutput, AgentError> {
    let spec = lookup(tool).ok_or_else(|| AgentError::UnknownTool(tool.to_string()))?;
    spec.validate(args).map_err(|errors| AgentError::InvalidArgs { tool: tool.to_string(), errors })?;
    match spec.name {
        tools::DETECT_SUPERVISED => detect_supervised(session, parse(args)?),
        tools::DETECT_ZEROSHOT => detect_zeroshot(session, parse(args)?),
        tools::POINT_QUERY => {
            let a: PointArgs = parse(args)?;
            point_query_tool(session, &a.points, &a.overrides)
        }
        tools::CAPTION => caption(session, parse(args)?),
        tools::PERCENTAGE => percentage(session),
        tools::COUNT_PATCHES => count(session, parse(args)?),
        tools::COMPARE_GT => compare(session),
        other => Err(AgentError::UnknownTool(other.to_string())),
    }
}

fn parse<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T, AgentError> {
    Ok(serde_json::from_value(v.clone())?)
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Source {
    #[default]
    Auto,
    Precomputed,
    Difference,
}

#[derive(Debug, Default, Deserialize)]
struct DetectArgs {
    #[serde(default)]
    source: Source,
    blur_sigma: Option<f64>,
    threshold: Option<f64>,
    min_area: Option<usize>,
    morph_radius: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchOverrides {
    pub change_angle_threshold: Option<f64>,
    pub stability_threshold: Option<f64>,
    pub area_threshold: Option<f64>,
    pub min_area_pixels: Option<u64>,
    pub object_similarity_threshold: Option<f64>,
    pub top_k: Option<usize>,
}

impl MatchOverrides {
    pub fn apply(&self, base: &MatchParams) -> MatchParams {
        let mut p = base.clone();
        if let Some(v) = self.change_angle_threshold {
            p.change_angle_threshold = v;
        }
        if let Some(v) = self.stability_threshold {
            p.stability_threshold = v;
        }
        if let Some(v) = self.area_threshold {
            p.area_threshold = v;
        }
        if let Some(v) = self.min_area_pixels {
            p.min_area_pixels = v;
        }
        if let Some(v) = self.object_similarity_threshold {
            p.object_similarity_threshold = v;
        }
        if self.top_k.is_some() {
            p.top_k = self.top_k;
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointArg {
    pub row: u32,
    pub col: u32,
    #[serde(default = "default_time")]
    pub time: Time,
}

fn default_time() -> Time {
    Time::T1
}

#[derive(Debug, Deserialize)]
struct PointArgs {
    points: Vec<PointArg>,
    #[serde(flatten)]
    overrides: MatchOverrides,
}

#[derive(Debug, Default, Deserialize)]
struct CaptionArgs {
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Default, Deserialize)]
struct CountArgs {
    connectivity: Option<u8>,
    min_area: Option<usize>,
}

fn percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

fn require_pair(session: &Session) -> Result<(), AgentError> {
    if session.pair.is_none() {
        return Err(AgentError::Precondition("no image pair is loaded; upload images A and B first".into()));
    }
    Ok(())
}

fn set_mask(session: &mut Session, mask: ChangeMask) -> Result<String, AgentError> {
    let name = session.store_artifact("png", mask.encode_png()?)?;
    session.last_mask = Some(mask);
    session.last_captions = None;
    Ok(name)
}

/// The current mask, running default detection first when there is none.
fn current_mask(session: &mut Session) -> Result<(ChangeMask, Option<ToolOutput>), AgentError> {
    if let Some(m) = &session.last_mask {
        return Ok((m.clone(), None));
    }
    let out = detect_supervised(session, DetectArgs::default())?;
    let mask = session.last_mask.clone().expect("detection stores a mask");
    Ok((mask, Some(out)))
}

fn with_auto_detect(auto: Option<ToolOutput>, mut out: ToolOutput) -> ToolOutput {
    if let Some(det) = auto {
        out.summary = format!("{} {}", det.summary, out.summary);
        if let Value::Object(m) = &mut out.data {
            m.insert("auto_detection".into(), det.data);
        }
        let mut artifacts = det.artifacts;
        artifacts.append(&mut out.artifacts);
        out.artifacts = artifacts;
    }
    out
}

fn detect_supervised(session: &mut Session, args: DetectArgs) -> Result<ToolOutput, AgentError> {
    require_pair(session)?;
    let use_precomputed = match args.source {
        Source::Precomputed => {
            if session.precomputed_mask.is_none() {
                return Err(AgentError::Precondition("no prediction mask was uploaded with the pair".into()));
            }
            true
        }
        Source::Auto => session.precomputed_mask.is_some(),
        Source::Difference => false,
    };
    let (mask, method) = if use_precomputed {
        (session.precomputed_mask.clone().expect("checked above"), "precomputed")
    } else {
        let mut cfg = DetectConfig::default();
        if let Some(v) = args.blur_sigma {
            cfg.blur_sigma = v;
        }
        if let Some(v) = args.threshold {
            cfg.threshold_mode = ThresholdMode::Fixed(v);
        }
        if let Some(v) = args.min_area {
            cfg.min_area = v;
        }
        if let Some(v) = args.morph_radius {
            cfg.morph_radius = v;
        }
        (difference_mask(session.pair.as_ref().expect("checked above"), &cfg)?, "difference")
    };
    let changed = mask.count();
    let fraction = mask.change_fraction();
    let (w, h) = mask.dims();
    let name = set_mask(session, mask)?;
    Ok(ToolOutput {
        summary: format!(
            "Change mask ready ({method}): {changed} of {} pixels changed ({:.2}%).",
            w as u64 * h as u64,
            percent(fraction)
        ),
        data: json!({
            "method": method,
            "changed_pixels": changed,
            "change_fraction": fraction,
            "width": w,
            "height": h,
            "mask": name,
        }),
        artifacts: vec![name],
    })
}

fn detect_zeroshot(session: &mut Session, args: MatchOverrides) -> Result<ToolOutput, AgentError> {
    let file = session
        .proposals
        .as_ref()
        .ok_or_else(|| AgentError::Precondition("no proposal file is loaded; upload one before zero-shot detection".into()))?;
    let params = args.apply(&session.params);
    params.validate()?;
    let (t1, t2) = file.split_by_time();
    let (t1, t2) = (filter_proposals(&t1, &params), filter_proposals(&t2, &params));
    let hits = bitemporal_match(&t1, &t2, &params)?;
    let mask = proposals_to_mask(hits.iter().map(|h| h.proposal), file.width, file.height)?;
    let changes: Vec<Value> = hits
        .iter()
        .map(|h| json!({"time": h.proposal.time, "id": h.proposal.id, "change_angle": h.change_angle}))
        .collect();
    let fraction = mask.change_fraction();
    let considered = t1.len() + t2.len();
    let n = hits.len();
    let name = set_mask(session, mask)?;
    Ok(ToolOutput {
        summary: format!(
            "Zero-shot matching flagged {n} of {considered} proposals as changed, covering {:.2}% of the image.",
            percent(fraction)
        ),
        data: json!({
            "changes": changes,
            "proposals_considered": considered,
            "change_fraction": fraction,
            "params": params,
            "mask": name,
        }),
        artifacts: vec![name],
    })
}

/// Shared by the point-query tool and the point-query endpoint.
pub fn point_query_tool(
    session: &mut Session,
    points: &[PointArg],
    overrides: &MatchOverrides,
) -> Result<ToolOutput, AgentError> {
    let file = session
        .proposals
        .as_ref()
        .ok_or_else(|| AgentError::Precondition("no proposal file is loaded; upload one before a point query".into()))?;
    let params = overrides.apply(&session.params);
    params.validate()?;
    let (t1, t2) = file.split_by_time();
    let (t1, t2) = (filter_proposals(&t1, &params), filter_proposals(&t2, &params));
    let pts: Vec<QueryPoint> = points.iter().map(|p| QueryPoint { row: p.row, col: p.col, time: p.time }).collect();
    let result = point_query(&pts, &t1, &t2, (file.width, file.height), &params)?;
    let mask = proposals_to_mask(result.changes.iter().map(|h| h.proposal), file.width, file.height)?;
    let describe = |hits: &[canopy_core::latent::ChangeHit<'_>]| -> Vec<Value> {
        hits.iter()
            .map(|h| json!({"time": h.proposal.time, "id": h.proposal.id, "change_angle": h.change_angle}))
            .collect()
    };
    let data_changes = describe(&result.changes);
    let data_category = describe(&result.category);
    let seeds: Vec<Value> = result.seeds.iter().map(|p| json!({"time": p.time, "id": p.id})).collect();
    let fraction = mask.change_fraction();
    let (n_changes, n_category) = (result.changes.len(), result.category.len());
    let name = set_mask(session, mask)?;
    Ok(ToolOutput {
        summary: format!(
            "Point query matched {n_category} similar proposals, of which {n_changes} changed, covering {:.2}% of the image.",
            percent(fraction)
        ),
        data: json!({
            "seeds": seeds,
            "category": data_category,
            "changes": data_changes,
            "change_fraction": fraction,
            "params": params,
            "mask": name,
        }),
        artifacts: vec![name],
    })
}

fn caption(session: &mut Session, args: CaptionArgs) -> Result<ToolOutput, AgentError> {
    let (mask, auto) = current_mask(session)?;
    let set = generate_caption_set(&mask, session.human_caption.as_deref(), args.seed)?;
    let all: Vec<String> = set.all().into_iter().map(str::to_owned).collect();
    let name = session.store_artifact("json", serde_json::to_vec_pretty(&set)?)?;
    let out = ToolOutput {
        summary: format!("{} captions: {}.", all.len(), all.join("; ")),
        data: json!({"captions": all, "human": set.human, "generated": set.generated, "artifact": name}),
        artifacts: vec![name],
    };
    session.last_captions = Some(set);
    Ok(with_auto_detect(auto, out))
}

fn percentage(session: &mut Session) -> Result<ToolOutput, AgentError> {
    let (mask, auto) = current_mask(session)?;
    let pct = percent(mask.change_fraction());
    let out = ToolOutput {
        summary: format!(
            "Deforested area: {pct:.2}% of the image ({} of {} pixels).",
            mask.count(),
            mask.len()
        ),
        data: json!({
            "percentage": pct,
            "change_fraction": mask.change_fraction(),
            "changed_pixels": mask.count(),
            "total_pixels": mask.len(),
        }),
        artifacts: vec![],
    };
    Ok(with_auto_detect(auto, out))
}

fn count(session: &mut Session, args: CountArgs) -> Result<ToolOutput, AgentError> {
    let (mask, auto) = current_mask(session)?;
    let conn = match args.connectivity {
        Some(n) => Connectivity::from_neighbours(n)?,
        None => Connectivity::default(),
    };
    let min_area = args.min_area.unwrap_or(1);
    let patches: Vec<_> = connected_patches(&mask, conn).into_iter().filter(|p| p.area >= min_area).collect();
    let stats = patch_statistics(&patches);
    let largest = patches.first().map_or(0, |p| p.area);
    let listed: Vec<Value> = patches
        .iter()
        .map(|p| json!({"id": p.id, "area": p.area, "bbox": p.bbox, "centroid": p.centroid}))
        .collect();
    let out = ToolOutput {
        summary: format!(
            "Found {} cleared patches (largest {largest} pixels, mean {:.1} pixels).",
            stats.count, stats.mean_area
        ),
        data: json!({
            "count": stats.count,
            "mean_area": stats.mean_area,
            "std_area": stats.std_area,
            "coefficient_of_variation": stats.coefficient_of_variation,
            "largest_area": largest,
            "patches": listed,
        }),
        artifacts: vec![],
    };
    Ok(with_auto_detect(auto, out))
}

fn compare(session: &mut Session) -> Result<ToolOutput, AgentError> {
    require_pair(session)?;
    let gt = session
        .pair
        .as_ref()
        .and_then(|p| p.ground_truth().cloned())
        .ok_or_else(|| AgentError::Precondition("no ground-truth mask was uploaded with the pair".into()))?;
    let (mask, auto) = current_mask(session)?;
    let cm = ConfusionMatrix::from_masks(&mask, &gt)?;
    let scores = miou(&cm);
    let base = session.pair.as_ref().expect("checked above").image_b();
    let img = overlay(&mask, &gt, base)?;
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(canopy_core::Error::from)?;
    let name = session.store_artifact("png", png)?;
    let out = ToolOutput {
        summary: format!(
            "Against ground truth: mIoU {:.2}%, IoU(change) {:.2}%, IoU(no change) {:.2}%.",
            scores.miou * 100.0,
            scores.iou_c * 100.0,
            scores.iou_nc * 100.0
        ),
        data: json!({
            "miou": scores.miou,
            "iou_c": scores.iou_c,
            "iou_nc": scores.iou_nc,
            "confusion": cm,
            "overlay": name,
        }),
        artifacts: vec![name],
    };
    Ok(with_auto_detect(auto, out))
}

#[cfg(test)]
mod tests {
    use canopy_core::raster::{BitemporalPair, RgbImage};
    use image::Rgb;

    use super::*;

    fn session_with_mask(mask: ChangeMask) -> Session {
        let (w, h) = mask.dims();
        let img = RgbImage::from_pixel(w, h, Rgb([0, 0, 0]));
        let mut s = Session::new("t");
        s.reset_pair(BitemporalPair::new(img.clone(), img, Some(mask.clone())).unwrap());
        s.precomputed_mask = Some(mask);
        s
    }

    fn three_blobs() -> ChangeMask {
        ChangeMask::from_fn(30, 30, |r, c| (r < 3 && c < 3) || (r > 10 && r < 14 && c > 10 && c < 20) || (r > 25 && c > 25))
            .unwrap()
    }

    #[test]
    fn count_patches_on_fixture() {
        let mut s = session_with_mask(three_blobs());
        let out = execute_tool(&mut s, tools::COUNT_PATCHES, &json!({})).unwrap();
        assert_eq!(out.data["count"], 3);
        assert!(out.data.get("auto_detection").is_some());
        let again = execute_tool(&mut s, tools::COUNT_PATCHES, &json!({"min_area": 10})).unwrap();
        assert_eq!(again.data["count"], 2);
    }

    #[test]
    fn preconditions_surface_as_errors() {
        let mut s = Session::new("t");
        assert!(matches!(execute_tool(&mut s, tools::PERCENTAGE, &json!({})), Err(AgentError::Precondition(_))));
        let mut s = session_with_mask(three_blobs());
        assert!(matches!(execute_tool(&mut s, tools::DETECT_ZEROSHOT, &json!({})), Err(AgentError::Precondition(_))));
        assert!(matches!(execute_tool(&mut s, "nope", &json!({})), Err(AgentError::UnknownTool(_))));
        assert!(matches!(
            execute_tool(&mut s, tools::COUNT_PATCHES, &json!({"connectivity": 5})),
            Err(AgentError::InvalidArgs { .. })
        ));
    }

    #[test]
    fn caption_count_depends_on_human_caption() {
        let mut s = session_with_mask(three_blobs());
        let out = execute_tool(&mut s, tools::CAPTION, &json!({})).unwrap();
        assert_eq!(out.data["captions"].as_array().unwrap().len(), 4);
        s.human_caption = Some("three small clearings appear".into());
        let out = execute_tool(&mut s, tools::CAPTION, &json!({"seed": 2})).unwrap();
        assert_eq!(out.data["captions"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn percentage_and_comparison() {
        let mut s = session_with_mask(three_blobs());
        let out = execute_tool(&mut s, tools::PERCENTAGE, &json!({})).unwrap();
        let expected = percent(three_blobs().change_fraction());
        assert_eq!(out.data["percentage"], json!(expected));
        assert!(out.summary.contains(&format!("{expected:.2}%")));
        let cmp = execute_tool(&mut s, tools::COMPARE_GT, &json!({})).unwrap();
        assert_eq!(cmp.data["miou"], 1.0);
        assert!(s.artifact(cmp.artifacts[0].as_str()).is_some());
    }
}
