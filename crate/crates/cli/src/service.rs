//! Read-only JSON service over an immutable score index.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};
use verbspace::retrieval::{
    text_to_video_lemmas, video_to_video, QueryScoring, Ranked, RetrievalResult,
};
use verbspace::{Error, VerbSpaceIndex, VerbVocabulary};

/// Page size when a request does not give one.
pub const DEFAULT_LIMIT: usize = 50;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub cors_origins: Vec<String>,
}

/// Why the service refused to start.
#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("409 conflict: index fingerprint {index} does not match vocabulary fingerprint {vocab}")]
    FingerprintMismatch { index: String, vocab: String },
    #[error("invalid CORS origin `{0}`")]
    BadOrigin(String),
}

struct AppState {
    index: VerbSpaceIndex,
    fingerprint: String,
}

type Shared = State<Arc<AppState>>;

/// Refuses an index built against a different vocabulary.
pub fn check_fingerprint(index: &VerbSpaceIndex, vocab: &VerbVocabulary) -> Result<(), StartupError> {
    let (index_fp, vocab_fp) = (index.fingerprint(), vocab.fingerprint());
    if index_fp == vocab_fp {
        Ok(())
    } else {
        Err(StartupError::FingerprintMismatch { index: index_fp, vocab: vocab_fp })
    }
}

pub fn router(index: VerbSpaceIndex, cors_origins: &[String]) -> Result<Router, StartupError> {
    let fingerprint = index.fingerprint();
    let state = Arc::new(AppState { index, fingerprint });
    let app = Router::new()
        .route("/v1/vocab", get(vocab))
        .route("/v1/videos/{id}", get(video))
        .route("/v1/datasets", get(datasets))
        .route("/v1/retrieve/text", post(retrieve_text))
        .route("/v1/retrieve/video", post(retrieve_video))
        .fallback(not_found)
        .with_state(state);
    if cors_origins.is_empty() {
        return Ok(app);
    }
    let origins = cors_origins
        .iter()
        .map(|o| HeaderValue::from_str(o).map_err(|_| StartupError::BadOrigin(o.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Ok(app.layer(cors))
}

/// Serves until the process is stopped.
pub async fn serve(
    index: VerbSpaceIndex,
    vocab: &VerbVocabulary,
    cfg: &ServiceConfig,
) -> anyhow::Result<()> {
    check_fingerprint(&index, vocab)?;
    let videos = index.len();
    let app = router(index, &cfg.cors_origins)?;
    let listener = tokio::net::TcpListener::bind(cfg.bind).await?;
    log::info!("serving {videos} videos on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

fn reply(state: &AppState, status: StatusCode, mut body: Value) -> Response {
    body["fingerprint"] = Value::String(state.fingerprint.clone());
    (status, Json(body)).into_response()
}

fn error(state: &AppState, status: StatusCode, message: String, extra: Option<(&str, Value)>) -> Response {
    let mut body = json!({ "error": message });
    if let Some((key, value)) = extra {
        body[key] = value;
    }
    reply(state, status, body)
}

fn library_error(state: &AppState, e: Error) -> Response {
    match e {
        Error::UnknownVerb(lemma) => error(
            state,
            StatusCode::BAD_REQUEST,
            format!("unknown verb `{lemma}`"),
            Some(("verb", Value::String(lemma))),
        ),
        Error::UnknownVideo(id) => error(
            state,
            StatusCode::NOT_FOUND,
            format!("unknown video `{id}`"),
            Some(("video_id", Value::String(id))),
        ),
        other => error(state, StatusCode::BAD_REQUEST, other.to_string(), None),
    }
}

async fn not_found(State(state): Shared) -> Response {
    error(&state, StatusCode::NOT_FOUND, "no such endpoint".into(), None)
}

async fn vocab(State(state): Shared) -> Response {
    let verbs: Vec<Value> = state
        .index
        .vocab()
        .iter()
        .enumerate()
        .map(|(i, (lemma, t))| json!({ "index": i, "lemma": lemma, "type": t.to_string() }))
        .collect();
    reply(&state, StatusCode::OK, json!({ "verbs": verbs }))
}

async fn video(State(state): Shared, Path(id): Path<String>) -> Response {
    match state.index.get(&id) {
        Some(entry) => reply(&state, StatusCode::OK, json!({ "video": entry })),
        None => library_error(&state, Error::UnknownVideo(id)),
    }
}

async fn datasets(State(state): Shared) -> Response {
    let list: Vec<Value> = state
        .index
        .datasets()
        .into_iter()
        .map(|(id, videos)| json!({ "dataset_id": id, "videos": videos }))
        .collect();
    reply(&state, StatusCode::OK, json!({ "datasets": list }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextRequest {
    verbs: Vec<String>,
    /// Alias of `limit`.
    n: Option<usize>,
    limit: Option<usize>,
    #[serde(default)]
    offset: usize,
    #[serde(default)]
    scoring: QueryScoring,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VideoRequest {
    video_id: String,
    #[serde(default)]
    cross_dataset: bool,
    limit: Option<usize>,
    #[serde(default)]
    offset: usize,
}

#[derive(Serialize)]
struct Page<'a> {
    query: &'a verbspace::retrieval::QueryEcho,
    total: usize,
    offset: usize,
    limit: usize,
    items: &'a [Ranked<f64>],
}

fn parse_body<T: serde::de::DeserializeOwned>(state: &AppState, body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| {
        error(state, StatusCode::BAD_REQUEST, format!("malformed request: {e}"), None)
    })
}

fn page(state: &AppState, result: &RetrievalResult<f64>, offset: usize, limit: usize) -> Response {
    let body = Page {
        query: &result.query,
        total: result.items.len(),
        offset,
        limit,
        items: result.page(offset, limit),
    };
    let body = serde_json::to_value(body).expect("page serializes");
    reply(state, StatusCode::OK, body)
}

async fn retrieve_text(State(state): Shared, body: Bytes) -> Response {
    let req: TextRequest = match parse_body(&state, &body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    if req.verbs.is_empty() {
        return error(&state, StatusCode::BAD_REQUEST, "query has no verbs".into(), None);
    }
    let limit = req.limit.or(req.n).unwrap_or(DEFAULT_LIMIT);
    match text_to_video_lemmas(&state.index, &req.verbs, req.scoring) {
        Ok(result) => page(&state, &result, req.offset, limit),
        Err(e) => library_error(&state, e),
    }
}

async fn retrieve_video(State(state): Shared, body: Bytes) -> Response {
    let req: VideoRequest = match parse_body(&state, &body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let limit = req.limit.unwrap_or(DEFAULT_LIMIT);
    match video_to_video(&state.index, &req.video_id, req.cross_dataset) {
        Ok(result) => page(&state, &result, req.offset, limit),
        Err(e) => library_error(&state, e),
    }
}
