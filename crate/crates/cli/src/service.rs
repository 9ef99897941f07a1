//! HTTP review service for audit candidates.
//!
//! | method | path                         |                                     |
//! |--------|------------------------------|-------------------------------------|
//! | GET    | /api/candidates              | `?status=&page=&page_size=`         |
//! | GET    | /api/images/{model}/{id}     | image bytes for a ground-truth id   |
//! | POST   | /api/verdicts                | record a decision                   |
//! | GET    | /api/progress                | counts by status and model          |
//! | GET    | /api/export/corrected-gt     | ground truth plus accepted boxes    |
//!
//! Reads use the current [`ReviewState`] snapshot without locking. Posts are
//! serialized through the log mutex: check, append and sync, then publish a
//! new snapshot.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use arc_swap::ArcSwap;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::Mutex;
use tower_http::services::ServeDir;
use uwqa_core::deteval::{AuditCandidate, CandidateFile, CandidateStatus, GroundTruth};

use crate::layout::DatasetLayout;
use crate::verdict::{Applied, LogError, ReviewState, VerdictError, VerdictLog, VerdictRequest};

pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 200;

pub struct AppState {
    layout: DatasetLayout,
    gt: GroundTruth,
    snapshot: ArcSwap<ReviewState>,
    log: Mutex<VerdictLog>,
}

impl AppState {
    /// Replays `verdict_log` (created if missing) against the candidates.
    pub fn open(
        layout: DatasetLayout,
        gt: GroundTruth,
        candidates: CandidateFile,
        verdict_log: &Path,
    ) -> Result<Self, LogError> {
        let mut state = ReviewState::new(Arc::new(candidates));
        let log = VerdictLog::open(verdict_log, &mut state)?;
        Ok(Self {
            layout,
            gt,
            snapshot: ArcSwap::from_pointee(state),
            log: Mutex::new(log),
        })
    }

    pub fn snapshot(&self) -> Arc<ReviewState> {
        self.snapshot.load_full()
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/candidates", get(list_candidates))
        .route("/api/images/{model}/{image_id}", get(image))
        .route("/api/verdicts", post(post_verdict))
        .route("/api/progress", get(progress))
        .route("/api/export/corrected-gt", get(corrected_gt))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body {
            error: String,
        }
        (self.0, Json(Body { error: self.1 })).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn not_found(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, msg.into())
}

impl From<VerdictError> for ApiError {
    fn from(e: VerdictError) -> Self {
        let code = match e {
            VerdictError::Malformed(_) => StatusCode::BAD_REQUEST,
            VerdictError::UnknownCandidate(_) => StatusCode::NOT_FOUND,
            VerdictError::Conflict { .. } => StatusCode::CONFLICT,
        };
        ApiError(code, e.to_string())
    }
}

#[derive(Serialize)]
struct ImageUrls {
    original: String,
    enhanced: String,
}

#[derive(Serialize)]
struct CandidateView {
    #[serde(flatten)]
    candidate: AuditCandidate,
    images: ImageUrls,
}

#[derive(Serialize)]
struct CandidatePage {
    total: usize,
    page: usize,
    page_size: usize,
    items: Vec<CandidateView>,
}

async fn list_candidates(
    State(app): State<Arc<AppState>>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<CandidatePage>, ApiError> {
    let parse = |key: &str| -> Result<Option<usize>, ApiError> {
        params
            .get(key)
            .map(|v| v.parse::<usize>().map_err(|_| bad_request(format!("`{key}` must be a positive integer"))))
            .transpose()
    };
    let status: Option<CandidateStatus> = params
        .get("status")
        .map(String::as_str)
        .map(str::parse)
        .transpose()
        .map_err(|e: uwqa_core::Error| bad_request(e.to_string()))?;
    let page = parse("page")?.unwrap_or(1);
    let page_size = parse("page_size")?.unwrap_or(DEFAULT_PAGE_SIZE);
    if page == 0 || page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(bad_request(format!(
            "page starts at 1 and page_size must be in 1..={MAX_PAGE_SIZE}"
        )));
    }

    let snap = app.snapshot();
    let matching: Vec<&AuditCandidate> = snap
        .candidates()
        .iter()
        .filter(|c| status.is_none_or(|s| snap.status(&c.id) == s))
        .collect();
    let items = matching
        .iter()
        .skip((page - 1) * page_size)
        .take(page_size)
        .map(|c| {
            let mut candidate = (*c).clone();
            candidate.status = snap.status(&c.id);
            let url = |model: &str| format!("/api/images/{model}/{}", c.image_id);
            CandidateView {
                images: ImageUrls {
                    original: url(uwqa_core::qindex::ORIGINAL_MODEL),
                    enhanced: url(&c.model),
                },
                candidate,
            }
        })
        .collect();
    Ok(Json(CandidatePage {
        total: matching.len(),
        page,
        page_size,
        items,
    }))
}

fn content_type(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    }
}

async fn image(
    State(app): State<Arc<AppState>>,
    UrlPath((model, image_id)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let id: u64 = image_id
        .parse()
        .map_err(|_| not_found(format!("unknown image `{image_id}`")))?;
    let info = app
        .gt
        .image(id)
        .ok_or_else(|| not_found(format!("unknown image {id}")))?;
    // Files are looked up by stem in the layout, never by joining request
    // text onto a path.
    let stem = Path::new(&info.file_name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let path = app
        .layout
        .image_path(&model, stem)
        .ok_or_else(|| not_found(format!("no image `{stem}` for model `{model}`")))?;
    let bytes = tokio::fs::read(path)
        .await
        .map_err(|e| not_found(format!("{}: {e}", path.display())))?;
    Ok(([(header::CONTENT_TYPE, content_type(path))], bytes).into_response())
}

fn now_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

async fn post_verdict(State(app): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: VerdictRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("malformed verdict: {e}")))?;
    let mut log = app.log.lock().await;
    let snap = app.snapshot();
    match snap.check(req, now_seconds())? {
        Applied::Unchanged(v) => Ok((StatusCode::OK, Json(v)).into_response()),
        Applied::Recorded(v) => {
            log.append(&v)
                .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
            let mut next = (*snap).clone();
            next.record(v.clone())?;
            app.snapshot.store(Arc::new(next));
            Ok((StatusCode::CREATED, Json(v)).into_response())
        }
    }
}

async fn progress(State(app): State<Arc<AppState>>) -> impl IntoResponse {
    Json(app.snapshot().progress())
}

async fn corrected_gt(State(app): State<Arc<AppState>>) -> impl IntoResponse {
    Json(app.snapshot().corrected_ground_truth(&app.gt))
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(app: Arc<AppState>, static_dir: Option<PathBuf>, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
