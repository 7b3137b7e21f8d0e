use std::sync::OnceLock;

use serde::Serialize;
use serde_json::{json, Value};

pub const DETECT_SUPERVISED: &str = "detect_changes_supervised";
pub const DETECT_ZEROSHOT: &str = "detect_changes_zeroshot";
pub const POINT_QUERY: &str = "point_query_changes";
pub const CAPTION: &str = "caption_changes";
pub const PERCENTAGE: &str = "deforestation_percentage";
pub const COUNT_PATCHES: &str = "count_patches";
pub const COMPARE_GT: &str = "compare_with_ground_truth";

#[derive(Debug, Serialize)]
pub struct ToolSpec {
    pub name: &'static str,
    pub description: &'static str,
    /// JSON Schema for the `args` object.
    pub schema: Value,
    /// A valid argument object, used in the system prompt.
    pub example: Value,
    #[serde(skip)]
    validator: jsonschema::Validator,
}

impl ToolSpec {
    fn new(name: &'static str, description: &'static str, schema: Value, example: Value) -> Self {
        let validator = jsonschema::validator_for(&schema).expect("tool schemas are valid JSON Schema");
        Self { name, description, schema, example, validator }
    }

    /// Every schema violation, one message each.
    pub fn validate(&self, args: &Value) -> Result<(), Vec<String>> {
        let errors: Vec<String> =
            self.validator.iter_errors(args).map(|e| format!("{}: {}", e.instance_path(), e)).collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

fn angle(description: &str) -> Value {
    json!({"type": "number", "minimum": 0, "maximum": 180, "description": description})
}

fn props(v: Value) -> serde_json::Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => panic!("property block must be a JSON object"),
    }
}

fn match_properties() -> serde_json::Map<String, Value> {
    props(json!({
        "change_angle_threshold": angle("Minimum cross-time latent angle in degrees (default 145)."),
        "stability_threshold": {"type": "number", "minimum": 0, "maximum": 1},
        "area_threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "min_area_pixels": {"type": "integer", "minimum": 0},
        "object_similarity_threshold": angle("Maximum angle to the query embedding in degrees (default 60)."),
        "top_k": {"type": "integer", "minimum": 1}
    }))
}

fn object(properties: serde_json::Map<String, Value>, required: &[&str]) -> Value {
    json!({
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": false
    })
}

fn build() -> Vec<ToolSpec> {
    let mut point_props = match_properties();
    point_props.insert(
        "points".into(),
        json!({
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "row": {"type": "integer", "minimum": 0},
                    "col": {"type": "integer", "minimum": 0},
                    "time": {"type": "string", "enum": ["t1", "t2"]}
                },
                "required": ["row", "col"],
                "additionalProperties": false
            }
        }),
    );
    let detect_props = props(json!({
        "source": {
            "type": "string",
            "enum": ["auto", "precomputed", "difference"],
            "description": "auto uses an uploaded prediction mask when present, otherwise image differencing."
        },
        "blur_sigma": {"type": "number", "minimum": 0},
        "threshold": {"type": "number", "exclusiveMinimum": 0, "description": "Fixed difference threshold; Otsu when omitted."},
        "min_area": {"type": "integer", "minimum": 0},
        "morph_radius": {"type": "integer", "minimum": 0, "maximum": 8}
    }));

    vec![
        ToolSpec::new(
            DETECT_SUPERVISED,
            "Produce a binary change mask for the loaded image pair, from the uploaded prediction or by image differencing.",
            object(detect_props, &[]),
            json!({"source": "auto"}),
        ),
        ToolSpec::new(
            DETECT_ZEROSHOT,
            "Zero-shot change detection by comparing proposal embeddings across the two dates. Needs an uploaded proposal file.",
            object(match_properties(), &[]),
            json!({"change_angle_threshold": 145}),
        ),
        ToolSpec::new(
            POINT_QUERY,
            "Find changes of the same kind of object as the clicked points, using the uploaded proposal file.",
            object(point_props, &["points"]),
            json!({"points": [{"row": 10, "col": 12, "time": "t1"}]}),
        ),
        ToolSpec::new(
            CAPTION,
            "Describe the detected change in words: one human caption when available plus four generated captions.",
            object(props(json!({"seed": {"type": "integer", "minimum": 0}})), &[]),
            json!({}),
        ),
        ToolSpec::new(
            PERCENTAGE,
            "Percentage of the image area marked as changed (deforested) in the current mask.",
            object(Default::default(), &[]),
            json!({}),
        ),
        ToolSpec::new(
            COUNT_PATCHES,
            "Count connected cleared patches in the current mask and summarise their sizes.",
            object(
                props(json!({
                    "connectivity": {"type": "integer", "enum": [4, 8]},
                    "min_area": {"type": "integer", "minimum": 1}
                })),
                &[],
            ),
            json!({"connectivity": 8}),
        ),
        ToolSpec::new(
            COMPARE_GT,
            "Compare the current mask with the ground-truth mask: IoU scores and a colour overlay (yellow agreement, red false positive, green missed).",
            object(Default::default(), &[]),
            json!({}),
        ),
    ]
}

pub fn registry() -> &'static [ToolSpec] {
    static REGISTRY: OnceLock<Vec<ToolSpec>> = OnceLock::new();
    REGISTRY.get_or_init(build)
}

pub fn lookup(name: &str) -> Option<&'static ToolSpec> {
    registry().iter().find(|t| t.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_tools_with_valid_examples() {
        let names: Vec<_> = registry().iter().map(|t| t.name).collect();
        assert_eq!(names.len(), 7);
        for t in registry() {
            assert_eq!(t.validate(&t.example), Ok(()), "{}", t.name);
        }
        assert!(lookup("google_search").is_none());
    }

    #[test]
    fn schemas_reject_bad_args() {
        let count = lookup(COUNT_PATCHES).unwrap();
        assert!(count.validate(&json!({"connectivity": 6})).is_err());
        assert!(count.validate(&json!({"bogus": 1})).is_err());
        let pq = lookup(POINT_QUERY).unwrap();
        assert!(pq.validate(&json!({})).is_err());
        assert!(pq.validate(&json!({"points": []})).is_err());
        assert!(pq.validate(&json!({"points": [{"row": -1, "col": 0}]})).is_err());
        let z = lookup(DETECT_ZEROSHOT).unwrap();
        assert!(z.validate(&json!({"change_angle_threshold": 190})).is_err());
    }
}
