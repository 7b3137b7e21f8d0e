use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use canopy_agent::{router, AppState, ScriptedBackend, SessionStore};
use canopy_core::latent::{synth_proposals, SynthSpec};
use canopy_core::raster::ChangeMask;
use http_body_util::BodyExt;
use image::{ImageFormat, Rgb, RgbImage};
use serde_json::{json, Value};
use tower::ServiceExt;

const BOUNDARY: &str = "canopy-test-boundary";
const SQUARES: [(u32, u32); 3] = [(5, 5), (30, 40), (48, 12)];

fn in_square(r: u32, c: u32) -> bool {
    SQUARES.iter().any(|&(r0, c0)| (r0..r0 + 10).contains(&r) && (c0..c0 + 10).contains(&c))
}

fn png(img: &RgbImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).unwrap();
    out.into_inner()
}

/// Forest scene with three cleared 10x10 squares in the second image.
fn fixture_pair() -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let a = RgbImage::from_fn(64, 64, |_, _| Rgb([34, 110, 40]));
    let b = RgbImage::from_fn(64, 64, |x, y| if in_square(y, x) { Rgb([150, 110, 70]) } else { Rgb([34, 110, 40]) });
    let gt = ChangeMask::from_fn(64, 64, in_square).unwrap();
    (png(&a), png(&b), gt.encode_png().unwrap())
}

fn multipart(parts: &[(&str, &[u8])]) -> Vec<u8> {
    let mut body = Vec::new();
    for (name, bytes) in parts {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}.png\"\r\n\r\n")
                .as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

fn app() -> Router {
    router(AppState { sessions: SessionStore::new(None), backend: Arc::new(ScriptedBackend::default()) }, None)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, bytes) = send(app, req).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn new_session(app: &Router) -> String {
    let (status, body) = post_json(app, "/api/session", json!({})).await;
    assert_eq!(status, StatusCode::CREATED);
    body["id"].as_str().unwrap().to_string()
}

async fn upload_fixture(app: &Router, id: &str) {
    let (a, b, gt) = fixture_pair();
    let req = Request::post(format!("/api/session/{id}/pair"))
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(&[("a", &a), ("b", &b), ("gt", &gt)])))
        .unwrap();
    let (status, body) = send(app, req).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
}

async fn chat(app: &Router, id: &str, message: &str) -> (StatusCode, Value) {
    post_json(app, &format!("/api/session/{id}/chat"), json!({ "message": message })).await
}

async fn artifact(app: &Router, id: &str, name: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(format!("/api/session/{id}/artifact/{name}")).body(Body::empty()).unwrap()).await
}

const CONVERSATION: [&str; 5] = [
    "detect changes",
    "describe the changes",
    "what percentage of the area was deforested",
    "how many patches were cleared?",
    "compare with the ground truth",
];

/// Runs the fixture conversation and returns every reply plus all artifact bytes.
async fn full_conversation(app: &Router) -> (Vec<Value>, Vec<(String, Vec<u8>)>) {
    let id = new_session(app).await;
    upload_fixture(app, &id).await;
    let mut replies = Vec::new();
    let mut blobs = Vec::new();
    for msg in CONVERSATION {
        let (status, reply) = chat(app, &id, msg).await;
        assert_eq!(status, StatusCode::OK, "{msg}: {reply}");
        for name in reply["artifacts"].as_array().unwrap() {
            let name = name.as_str().unwrap();
            let (status, bytes) = artifact(app, &id, name).await;
            assert_eq!(status, StatusCode::OK);
            blobs.push((name.to_string(), bytes));
        }
        replies.push(reply);
    }
    (replies, blobs)
}

fn tool_calls(reply: &Value) -> Vec<String> {
    reply["turn"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["role"] == "tool_call")
        .map(|e| e["tool"].as_str().unwrap().to_string())
        .collect()
}

fn tool_data<'a>(reply: &'a Value, tool: &str) -> &'a Value {
    reply["turn"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["role"] == "tool_result" && e["tool"] == tool)
        .map(|e| &e["data"])
        .unwrap()
}

#[tokio::test]
async fn healthz_reports_build_info() {
    let (status, body) = send(&app(), Request::get("/healthz").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["name"], "canopy-agent");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn fixture_conversation_end_to_end() {
    let app = app();
    let (replies, blobs) = full_conversation(&app).await;

    assert_eq!(tool_calls(&replies[0]), ["detect_changes_supervised"]);
    let mask = ChangeMask::decode_png(&blobs[0].1).unwrap();
    assert_eq!(mask.count(), 300);

    let captions = tool_data(&replies[1], "caption_changes")["captions"].as_array().unwrap().len();
    assert_eq!(captions, 4);

    let pct = tool_data(&replies[2], "deforestation_percentage")["percentage"].as_f64().unwrap();
    assert_eq!(pct, 7.32);
    assert!(replies[2]["reply"].as_str().unwrap().contains("7.32%"));

    assert_eq!(tool_data(&replies[3], "count_patches")["count"], 3);
    assert!(replies[3]["reply"].as_str().unwrap().contains('3'));

    let miou = tool_data(&replies[4], "compare_with_ground_truth")["miou"].as_f64().unwrap();
    assert_eq!(miou, 1.0);
    assert!(blobs.iter().any(|(n, _)| n.ends_with(".png") && n != &blobs[0].0));
}

#[tokio::test]
async fn repeated_runs_are_byte_identical() {
    let first = full_conversation(&app()).await;
    let second = full_conversation(&app()).await;
    assert_eq!(serde_json::to_vec(&first.0).unwrap(), serde_json::to_vec(&second.0).unwrap());
    assert_eq!(first.1, second.1);
}

#[tokio::test]
async fn sessions_do_not_share_state() {
    let app = app();
    let (one, two) = (new_session(&app).await, new_session(&app).await);
    upload_fixture(&app, &one).await;
    let (_, reply) = chat(&app, &one, "detect changes").await;
    let name = reply["artifacts"][0].as_str().unwrap().to_string();
    let (status, reply_two) = chat(&app, &two, "count the patches").await;
    assert_eq!(status, StatusCode::OK);
    assert!(reply_two["reply"].as_str().unwrap().contains("failed"));
    assert_eq!(artifact(&app, &two, &name).await.0, StatusCode::NOT_FOUND);
    assert_eq!(artifact(&app, &one, &name).await.0, StatusCode::OK);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let (status, body) = chat(&app(), "missing", "hello").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("missing"));
}

#[tokio::test]
async fn point_query_endpoint() {
    let app = app();
    let id = new_session(&app).await;
    let scene = synth_proposals(&SynthSpec { width: 128, height: 128, clusters: 2, per_cluster: 4, unstable_distractors: 0, ..SynthSpec::default() }).unwrap();
    let (status, body) = post_json(&app, &format!("/api/session/{id}/proposals"), serde_json::to_value(&scene.file).unwrap()).await;
    assert_eq!(status, StatusCode::OK, "{body}");

    let (status, body) = post_json(
        &app,
        &format!("/api/session/{id}/point-query"),
        json!({"points": [{"row": 128, "col": 3}]}),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("outside 128x128"), "{body}");

    let planted = scene.planted.iter().next().unwrap();
    let (row, col) = scene.interior_point(planted.0, planted.1).unwrap();
    let (status, body) = post_json(
        &app,
        &format!("/api/session/{id}/point-query"),
        json!({"points": [{"row": row, "col": col, "time": planted.0}], "params": {"change_angle_threshold": 145.0}}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(!body["data"]["changes"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn bad_uploads_are_rejected() {
    let app = app();
    let id = new_session(&app).await;
    let req = Request::post(format!("/api/session/{id}/pair"))
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(&[("a", b"not a png")])))
        .unwrap();
    assert_eq!(send(&app, req).await.0, StatusCode::BAD_REQUEST);
    let (status, _) = post_json(&app, &format!("/api/session/{id}/proposals"), json!({"width": 0})).await;
    assert!(status.is_client_error());
}

struct Garbage;

#[async_trait::async_trait]
impl canopy_agent::ChatBackend for Garbage {
    async fn complete(&self, _: &[canopy_agent::ChatMessage]) -> Result<String, canopy_agent::AgentError> {
        Ok("I think the answer is probably 12".into())
    }

    fn name(&self) -> &'static str {
        "garbage"
    }
}

#[tokio::test]
async fn persistent_malformed_output_fails_the_turn_with_transcript() {
    let app = router(AppState { sessions: SessionStore::new(None), backend: Arc::new(Garbage) }, None);
    let id = new_session(&app).await;
    let (status, body) = chat(&app, &id, "count the patches").await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert!(body["error"].as_str().unwrap().contains("malformed"));
    let roles: Vec<&str> = body["turn"].as_array().unwrap().iter().map(|e| e["role"].as_str().unwrap()).collect();
    assert_eq!(roles, ["user", "assistant", "error", "assistant", "error"]);

    let (_, summary) = send(&app, Request::get(format!("/api/session/{id}")).body(Body::empty()).unwrap()).await;
    let summary: Value = serde_json::from_slice(&summary).unwrap();
    assert_eq!(summary["transcript"].as_array().unwrap().len(), 5);
}
