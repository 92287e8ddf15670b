//! JSON HTTP API over a loaded bundle and the history store.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::audio::decode_wav;
use crate::classify::{Distribution, ModelBundle};
use crate::eval::{classify_report, ClassificationReport, EvalError};
use crate::genre::Genre;
use crate::store::{FeedbackRecord, HistoryEntry, Store, StoreError, DEFAULT_PAGE};

pub const MAX_UPLOAD_BYTES: usize = 50 * 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub bundle: Option<Arc<ModelBundle>>,
    pub store: Arc<Store>,
}

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub static_dir: Option<PathBuf>,
    pub cors_allow_all: bool,
}

/// `{code, message}` with an HTTP status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code.to_string(), message: self.message };
        (self.status, Json(body)).into_response()
    }
}

impl From<EvalError> for ApiError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Audio(a) => ApiError::new(StatusCode::BAD_REQUEST, a.code(), a.to_string()),
            EvalError::Feature(f) => ApiError::new(StatusCode::BAD_REQUEST, "MALFORMED_AUDIO", f.to_string()),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.code(), other.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownReportId(id) => {
                ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_REPORT", format!("no report with id {id}"))
            }
            StoreError::InvalidFeedback(m) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_LABELS", m),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "STORE_ERROR", other.to_string()),
        }
    }
}

/// Genre name to percentage (probability x 100, two decimals).
pub type PercentMap = BTreeMap<String, f64>;

fn percent(p: f64) -> f64 {
    (p * 10_000.0).round() / 100.0
}

pub fn percent_map(d: &Distribution) -> PercentMap {
    Genre::ALL.iter().map(|g| (g.name().to_string(), percent(d.prob(*g)))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub report_id: String,
    pub per_algorithm: BTreeMap<String, PercentMap>,
    pub consensus: PercentMap,
    pub top_genre: String,
    pub confidence_percent: f64,
    pub tempo_bpm: Option<f64>,
}

impl From<&ClassificationReport> for AnalyzeResponse {
    fn from(r: &ClassificationReport) -> Self {
        Self {
            report_id: r.report_id.clone(),
            per_algorithm: r.per_algorithm.iter().map(|(a, d)| (a.key().to_string(), percent_map(d))).collect(),
            consensus: percent_map(&r.consensus),
            top_genre: r.top_genre.name().to_string(),
            confidence_percent: percent(r.confidence),
            tempo_bpm: r.tempo_bpm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackView {
    pub genres: Vec<String>,
    pub note: Option<String>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    #[serde(flatten)]
    pub analysis: AnalyzeResponse,
    pub created_at: DateTime<Utc>,
    pub source_name: Option<String>,
    pub feedback: Vec<FeedbackView>,
}

impl From<&HistoryEntry> for HistoryItem {
    fn from(e: &HistoryEntry) -> Self {
        Self {
            analysis: AnalyzeResponse::from(&e.report),
            created_at: e.report.created_at,
            source_name: e.source_name.clone(),
            feedback: e
                .feedback
                .iter()
                .map(|f| FeedbackView {
                    genres: f.user_genres.iter().map(|g| g.name().to_string()).collect(),
                    note: f.note.clone(),
                    submitted_at: f.submitted_at,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub bundle_loaded: bool,
}

pub fn router(state: AppState, options: &ServeOptions) -> Router {
    let api = Router::new()
        .route("/api/v1/analyze", post(analyze).layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES)))
        .route("/api/v1/reports/{id}/labels", post(submit_labels))
        .route("/api/v1/reports", get(list_reports))
        .route("/api/v1/genres", get(genres))
        .route("/api/v1/health", get(health))
        .with_state(state);
    let app = match &options.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    if options.cors_allow_all {
        app.layer(CorsLayer::permissive())
    } else {
        app
    }
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState, options: ServeOptions) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, bundle_loaded = state.bundle.is_some(), "listening");
    axum::serve(listener, router(state, &options))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn analyze(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<Json<AnalyzeResponse>, ApiError> {
    let body = body.map_err(|r| {
        let status = r.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE { "PAYLOAD_TOO_LARGE" } else { "BAD_BODY" };
        ApiError::new(status, code, r.body_text())
    })?;
    let bundle = state
        .bundle
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "NO_MODEL", "no model bundle is loaded"))?;
    let source = headers
        .get("x-filename")
        .and_then(|v| v.to_str().ok())
        .map(String::from);
    let store = state.store.clone();
    // decoding and feature extraction are CPU-bound
    let report = tokio::task::spawn_blocking(move || -> Result<ClassificationReport, ApiError> {
        let clip = decode_wav(&body).map_err(EvalError::from)?;
        let report = classify_report(&bundle, &clip)?;
        store.append_report(&report, source.as_deref())?;
        Ok(report)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))??;
    Ok(Json(AnalyzeResponse::from(&report)))
}

#[derive(Deserialize)]
struct LabelsBody {
    genres: Vec<String>,
    #[serde(default)]
    note: Option<String>,
}

async fn submit_labels(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<StatusCode, ApiError> {
    if !state.store.contains(&id) {
        return Err(StoreError::UnknownReportId(id).into());
    }
    let invalid = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_LABELS", m);
    let parsed: LabelsBody = serde_json::from_slice(&body).map_err(|e| invalid(format!("expected {{\"genres\": [...]}}: {e}")))?;
    if parsed.genres.is_empty() {
        return Err(invalid(format!("choose at least one of: {}", Genre::names().join(", "))));
    }
    let mut genres = Vec::new();
    for name in &parsed.genres {
        let g: Genre = name.parse().map_err(|e: crate::genre::UnknownGenre| invalid(e.to_string()))?;
        if !genres.contains(&g) {
            genres.push(g);
        }
    }
    let store = state.store.clone();
    let record = FeedbackRecord::new(&id, genres, parsed.note);
    tokio::task::spawn_blocking(move || store.append_feedback(&record))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))??;
    Ok(StatusCode::NO_CONTENT)
}

fn paging_param(params: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, ApiError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "INVALID_PAGING",
                format!("{key} must be a non-negative integer, got {v:?}"),
            )
        }),
    }
}

async fn list_reports(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<Vec<HistoryItem>>, ApiError> {
    let limit = paging_param(&params, "limit", DEFAULT_PAGE)?;
    let offset = paging_param(&params, "offset", 0)?;
    let store = state.store.clone();
    let entries = tokio::task::spawn_blocking(move || store.list_history(limit, offset))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))??;
    Ok(Json(entries.iter().map(HistoryItem::from).collect()))
}

async fn genres() -> Json<Vec<&'static str>> {
    Json(Genre::names())
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health { status: "ok".into(), bundle_loaded: state.bundle.is_some() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentages_round_to_two_decimals() {
        assert_eq!(percent(1.0 / 3.0), 33.33);
        assert_eq!(percent(0.123456), 12.35);
        let m = percent_map(&Distribution::uniform());
        assert_eq!(m.len(), 11);
        let sum: f64 = m.values().sum();
        assert!((sum - 100.0).abs() <= 0.1);
    }
}
