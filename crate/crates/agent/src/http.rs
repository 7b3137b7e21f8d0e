use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use canopy_core::latent::ProposalFile;
use canopy_core::raster::{BitemporalPair, ChangeMask};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::backend::ChatBackend;
use crate::error::AgentError;
use crate::exec::{point_query_tool, MatchOverrides, PointArg};
use crate::orchestrator::{handle_chat, ChatReply};
use crate::session::{SessionStore, TranscriptEntry};

const UPLOAD_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub sessions: SessionStore,
    pub backend: Arc<dyn ChatBackend>,
}

pub struct ApiError(AgentError);

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        Self(e)
    }
}

impl From<canopy_core::Error> for ApiError {
    fn from(e: canopy_core::Error) -> Self {
        Self(e.into())
    }
}

impl ApiError {
    fn status(&self) -> StatusCode {
        match &self.0 {
            AgentError::SessionNotFound(_) | AgentError::ArtifactNotFound(_) => StatusCode::NOT_FOUND,
            AgentError::BadRequest(_) | AgentError::Json(_) => StatusCode::BAD_REQUEST,
            AgentError::Precondition(_) | AgentError::UnknownTool(_) | AgentError::InvalidArgs { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            AgentError::Core(canopy_core::Error::Io(_)) | AgentError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            AgentError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
            AgentError::Backend(_) | AgentError::MalformedOutput(_) | AgentError::RoundLimit(_) => {
                StatusCode::BAD_GATEWAY
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::warn!(error = %self.0, "request failed");
        }
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/healthz", get(healthz))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(session_summary))
        .route("/api/session/{id}/pair", post(upload_pair))
        .route("/api/session/{id}/proposals", post(upload_proposals))
        .route("/api/session/{id}/chat", post(chat))
        .route("/api/session/{id}/point-query", post(point_query))
        .route("/api/session/{id}/artifact/{name}", get(artifact))
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

async fn healthz(State(state): State<AppState>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "backend": state.backend.name(),
    }))
}

#[derive(Serialize)]
struct Created {
    id: String,
}

async fn create_session(State(state): State<AppState>) -> (StatusCode, Json<Created>) {
    (StatusCode::CREATED, Json(Created { id: state.sessions.create() }))
}

async fn session_summary(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let handle = state.sessions.get(&id)?;
    let s = handle.lock().await;
    Ok(Json(json!({
        "id": s.id,
        "pair": s.pair.as_ref().map(|p| json!({"width": p.width(), "height": p.height(), "ground_truth": p.ground_truth().is_some()})),
        "proposals": s.proposals.as_ref().map(|f| f.proposals.len()),
        "params": s.params,
        "transcript": s.transcript(),
        "artifacts": s.artifact_names().collect::<Vec<_>>(),
    })))
}

fn bad(msg: impl Into<String>) -> ApiError {
    AgentError::BadRequest(msg.into()).into()
}

fn decode_rgb(field: &str, bytes: &[u8]) -> ApiResult<image::RgbImage> {
    image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map(|img| img.to_rgb8())
        .map_err(|e| bad(format!("field {field:?} is not a PNG image: {e}")))
}

/// Multipart fields: `a`, `b` (PNG, required), `gt`, `pred` (PNG masks) and `caption` (text).
async fn upload_pair(
    State(state): State<AppState>,
    Path(id): Path<String>,
    mut form: Multipart,
) -> ApiResult<Json<Value>> {
    let handle = state.sessions.get(&id)?;
    let (mut a, mut b, mut gt, mut pred, mut caption) = (None, None, None, None, None);
    while let Some(field) = form.next_field().await.map_err(|e| bad(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| bad(e.to_string()))?;
        match name.as_str() {
            "a" => a = Some(decode_rgb("a", &bytes)?),
            "b" => b = Some(decode_rgb("b", &bytes)?),
            "gt" => gt = Some(ChangeMask::decode_png(&bytes)?),
            "pred" => pred = Some(ChangeMask::decode_png(&bytes)?),
            "caption" => {
                let text = String::from_utf8(bytes.to_vec()).map_err(|_| bad("caption is not UTF-8"))?;
                caption = Some(text.trim().to_string()).filter(|t| !t.is_empty());
            }
            other => return Err(bad(format!("unexpected field {other:?}"))),
        }
    }
    let (Some(a), Some(b)) = (a, b) else {
        return Err(bad("both images \"a\" and \"b\" are required"));
    };
    let pair = BitemporalPair::new(a, b, gt)?;
    if let Some(p) = &pred {
        if p.dims() != (pair.width(), pair.height()) {
            return Err(canopy_core::Error::DimensionMismatch {
                expected: (pair.width(), pair.height()),
                actual: p.dims(),
            }
            .into());
        }
    }
    let (width, height, has_gt) = (pair.width(), pair.height(), pair.ground_truth().is_some());
    let mut s = handle.lock().await;
    s.reset_pair(pair);
    s.precomputed_mask = pred;
    s.human_caption = caption;
    Ok(Json(json!({
        "width": width,
        "height": height,
        "ground_truth": has_gt,
        "precomputed_mask": s.precomputed_mask.is_some(),
        "human_caption": s.human_caption.is_some(),
    })))
}

async fn upload_proposals(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: String,
) -> ApiResult<Json<Value>> {
    let handle = state.sessions.get(&id)?;
    let file = ProposalFile::from_json(&body)?;
    let mut s = handle.lock().await;
    if let Some(pair) = &s.pair {
        if (file.width, file.height) != (pair.width(), pair.height()) {
            return Err(canopy_core::Error::DimensionMismatch {
                expected: (pair.width(), pair.height()),
                actual: (file.width, file.height),
            }
            .into());
        }
    }
    let (t1, t2) = file.split_by_time();
    let summary = json!({"width": file.width, "height": file.height, "t1": t1.len(), "t2": t2.len()});
    s.proposals = Some(file);
    Ok(Json(summary))
}

#[derive(Deserialize)]
struct ChatRequest {
    message: String,
}

#[derive(Serialize)]
struct ChatError {
    error: String,
    turn: Vec<TranscriptEntry>,
}

async fn chat(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<ChatRequest>,
) -> Result<Json<ChatReply>, Response> {
    let handle = state.sessions.get(&id).map_err(|e| ApiError(e).into_response())?;
    let mut s = handle.lock().await;
    let start = s.transcript().len();
    match handle_chat(&mut s, state.backend.as_ref(), &req.message).await {
        Ok(reply) => Ok(Json(reply)),
        Err(e) => {
            let status = ApiError(e).status();
            let body = ChatError { error: last_error(&s, start), turn: s.transcript()[start..].to_vec() };
            Err((status, Json(body)).into_response())
        }
    }
}

/// The last error recorded since `start`.
fn last_error(s: &crate::session::Session, start: usize) -> String {
    s.transcript()[start..]
        .iter()
        .rev()
        .find_map(|e| match e {
            TranscriptEntry::Error { message } => Some(message.clone()),
            _ => None,
        })
        .unwrap_or_default()
}

#[derive(Deserialize)]
struct PointQueryRequest {
    points: Vec<PointArg>,
    #[serde(default)]
    params: MatchOverrides,
}

async fn point_query(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<PointQueryRequest>,
) -> ApiResult<Json<Value>> {
    if req.points.is_empty() {
        return Err(bad("at least one point is required"));
    }
    let handle = state.sessions.get(&id)?;
    let mut s = handle.lock().await;
    let out = point_query_tool(&mut s, &req.points, &req.params)?;
    Ok(Json(json!({"summary": out.summary, "data": out.data, "artifacts": out.artifacts})))
}

async fn artifact(State(state): State<AppState>, Path((id, name)): Path<(String, String)>) -> ApiResult<Response> {
    let handle = state.sessions.get(&id)?;
    let s = handle.lock().await;
    let a = s.artifact(&name).ok_or_else(|| AgentError::ArtifactNotFound(name.clone()))?;
    Ok(([(header::CONTENT_TYPE, a.content_type)], a.bytes.as_ref().clone()).into_response())
}

pub struct ServeConfig {
    pub addr: SocketAddr,
    pub data_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub backend: Arc<dyn ChatBackend>,
}

/// Binds and serves until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> std::io::Result<()> {
    let state = AppState { sessions: SessionStore::new(cfg.data_dir), backend: cfg.backend };
    let app = router(state, cfg.static_dir);
    let listener = tokio::net::TcpListener::bind(cfg.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
