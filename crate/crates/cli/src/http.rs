//! HTTP front end for [`ExperimentService`]. Every handler runs the blocking
//! service call on the blocking pool; payloads are JSON except gaze logs
//! (CSV text) and images (raw bytes).

use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use irisattn_core::experiment::{
    load_pool, DecisionSubmission, ExperimentService, ServiceConfig, ServiceError, Side,
};
use serde::Deserialize;
use serde_json::json;

use crate::cli::ServeArgs;

type Svc = Arc<ExperimentService>;

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        Self(e)
    }
}

pub fn status_of(e: &ServiceError) -> (StatusCode, &'static str) {
    match e {
        ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
        ServiceError::Sequence { .. } => (StatusCode::CONFLICT, "sequence"),
        ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
        ServiceError::Capacity { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "capacity"),
        ServiceError::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "invalid_request"),
        ServiceError::Grid(_) | ServiceError::Gaze(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_payload"),
        ServiceError::Crashed => (StatusCode::SERVICE_UNAVAILABLE, "crashed"),
        ServiceError::InvalidPool(_) | ServiceError::Corrupt { .. } | ServiceError::Io(_) => {
            (StatusCode::INTERNAL_SERVER_ERROR, "internal")
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = status_of(&self.0);
        (status, Json(json!({ "error": kind, "message": self.0.to_string() }))).into_response()
    }
}

async fn blocking<T, F>(svc: Svc, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&ExperimentService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError(ServiceError::Io(std::io::Error::other(e))))?
        .map_err(ApiError)
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub subject_id: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

async fn create_session(State(svc): State<Svc>, Json(req): Json<CreateSession>) -> Result<Response, ApiError> {
    let s = blocking(svc, move |s| s.create_session(&req.subject_id, req.k, req.seed)).await?;
    Ok((StatusCode::CREATED, Json(s)).into_response())
}

async fn list_sessions(State(svc): State<Svc>) -> Result<Response, ApiError> {
    let list: Vec<_> = blocking(svc, |s| Ok(s.sessions()))
        .await?
        .into_iter()
        .map(|s| json!({ "session_id": s.session_id, "subject_id": s.subject_id, "total": s.schedule.len(), "cursor": s.cursor }))
        .collect();
    Ok(Json(list).into_response())
}

async fn next_pair(State(svc): State<Svc>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    Ok(Json(blocking(svc, move |s| s.next_pair(&id)).await?).into_response())
}

async fn post_decision(
    State(svc): State<Svc>,
    UrlPath(id): UrlPath<String>,
    Json(sub): Json<DecisionSubmission>,
) -> Result<Response, ApiError> {
    Ok(Json(blocking(svc, move |s| s.record_decision(&id, sub)).await?).into_response())
}

async fn report(State(svc): State<Svc>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let r = blocking(svc, move |s| s.session_report(&id)).await?;
    Ok(Json(r.redacted()).into_response())
}

async fn put_grid(
    State(svc): State<Svc>,
    UrlPath((pair, name)): UrlPath<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let g = blocking(svc, move |s| s.put_grid(&pair, &name, &body)).await?;
    Ok(Json(json!({ "width": g.width(), "height": g.height() })).into_response())
}

async fn get_grid(State(svc): State<Svc>, UrlPath((pair, name)): UrlPath<(String, String)>) -> Result<Response, ApiError> {
    Ok(Json(blocking(svc, move |s| s.get_grid(&pair, &name)).await?).into_response())
}

async fn put_gaze(
    State(svc): State<Svc>,
    UrlPath((pair, name)): UrlPath<(String, String)>,
    body: String,
) -> Result<Response, ApiError> {
    let n = blocking(svc, move |s| s.put_gaze_log(&pair, &name, &body)).await?;
    Ok(Json(json!({ "samples": n })).into_response())
}

async fn get_gaze(State(svc): State<Svc>, UrlPath((pair, name)): UrlPath<(String, String)>) -> Result<Response, ApiError> {
    let raw = blocking(svc, move |s| s.get_gaze_log(&pair, &name)).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], raw).into_response())
}

fn parse_side(raw: &str) -> Result<Side, ApiError> {
    raw.parse().map_err(ApiError)
}

async fn pair_q(State(svc): State<Svc>, UrlPath((pair, side)): UrlPath<(String, String)>) -> Result<Response, ApiError> {
    let side = parse_side(&side)?;
    Ok(Json(blocking(svc, move |s| s.pair_overlap(&pair, side)).await?).into_response())
}

fn content_type(uri: &str) -> &'static str {
    let ext = Path::new(uri)
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("bmp") => "image/bmp",
        Some("tif" | "tiff") => "image/tiff",
        _ => "application/octet-stream",
    }
}

async fn image(State(svc): State<Svc>, UrlPath((pair, side)): UrlPath<(String, String)>) -> Result<Response, ApiError> {
    let side = parse_side(&side)?;
    let (bytes, uri) = blocking(svc, move |s| {
        let uri = s
            .pool()
            .iter()
            .find(|p| p.pair_id == pair)
            .map(|p| match side {
                Side::Left => p.left.uri.clone(),
                Side::Right => p.right.uri.clone(),
            })
            .unwrap_or_default();
        Ok((s.image_bytes(&pair, side)?, uri))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, content_type(&uri))], bytes).into_response())
}

pub fn router(svc: Svc) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/next", get(next_pair))
        .route("/sessions/{id}/decisions", post(post_decision))
        .route("/sessions/{id}/report", get(report))
        .route("/pairs/{id}/grids/{name}", get(get_grid).put(put_grid))
        .route("/pairs/{id}/gaze/{name}", get(get_gaze).put(put_gaze))
        .route("/pairs/{id}/q/{side}", get(pair_q))
        .route("/pairs/{id}/images/{side}", get(image))
        .with_state(svc)
}

/// Opens the service over `data_root` with the pool in `pool.json`.
pub fn open_service(data_root: &Path, config: ServiceConfig) -> anyhow::Result<ExperimentService> {
    let pool_path = data_root.join("pool.json");
    let raw = std::fs::read_to_string(&pool_path).with_context(|| format!("reading {}", pool_path.display()))?;
    let pool = load_pool(&raw).with_context(|| format!("parsing {}", pool_path.display()))?;
    Ok(ExperimentService::open(data_root, pool, config)?)
}

pub async fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let config = ServiceConfig {
        default_k: args.k,
        default_seed: args.seed,
        ..Default::default()
    };
    let svc = Arc::new(open_service(&args.data, config)?);
    let listener = tokio::net::TcpListener::bind(args.listen)
        .await
        .with_context(|| format!("binding {}", args.listen))?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
