use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use super::{QcError, QcSample, QcState, VerdictRecord};
use crate::geometry::AugmentationKind;
use crate::model::{frame_path, mask_path, resolve_ref, Fps, Propagation, Task};

/// Shared state behind the router. Verdict appends take the write lock, so
/// they are serialized; reads run concurrently.
pub struct QcService {
    state: RwLock<QcState>,
}

impl QcService {
    pub fn new(state: QcState) -> Self {
        Self {
            state: RwLock::new(state),
        }
    }

    pub fn state(&self) -> parking_lot::RwLockReadGuard<'_, QcState> {
        self.state.read()
    }
}

/// What the reviewer UI needs to render one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePayload {
    pub id: String,
    pub task: Task,
    pub caption: String,
    pub entity_label: Option<String>,
    pub augmentation: AugmentationKind,
    pub propagation: Propagation,
    pub fps: Fps,
    pub resolution: (u32, u32),
    pub frames: usize,
    /// Whether the mask-propagation verdict applies (multi-frame samples).
    pub mp_applicable: bool,
    pub frame_urls: Vec<String>,
    pub mask_urls: Vec<String>,
}

impl SamplePayload {
    fn from_sample(s: &QcSample) -> Self {
        let r = &s.record;
        let urls = |kind: &str| (0..s.frames).map(|i| format!("/media/{}/{kind}/{i}", r.id)).collect();
        Self {
            id: r.id.clone(),
            task: r.task,
            caption: r.caption.clone(),
            entity_label: r.entity_label.clone(),
            augmentation: r.augmentation,
            propagation: r.propagation,
            fps: r.fps,
            resolution: r.resolution,
            frames: s.frames,
            mp_applicable: s.frames > 1,
            frame_urls: urls("frames"),
            mask_urls: urls("masks"),
        }
    }
}

#[derive(Deserialize)]
struct ReviewerQuery {
    reviewer: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn next_sample(State(svc): State<Arc<QcService>>, Query(q): Query<ReviewerQuery>) -> Response {
    let state = svc.state();
    match state.next_sample(&q.reviewer) {
        Some(s) => Json(SamplePayload::from_sample(s)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn sample(State(svc): State<Arc<QcService>>, UrlPath(id): UrlPath<String>) -> Response {
    match svc.state().sample(&id) {
        Some(s) => Json(SamplePayload::from_sample(s)).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("unknown sample {id:?}")),
    }
}

async fn verdict(State(svc): State<Arc<QcService>>, Json(v): Json<VerdictRecord>) -> Response {
    let result = tokio::task::spawn_blocking(move || svc.state.write().submit(v)).await;
    match result {
        Ok(Ok(())) => Json(serde_json::json!({ "status": "ok" })).into_response(),
        Ok(Err(e)) => {
            let status = match e {
                QcError::UnknownSample(_) => StatusCode::NOT_FOUND,
                QcError::Conflict { .. } => StatusCode::CONFLICT,
                QcError::MpPresenceViolation { .. } | QcError::EmptyReviewer => StatusCode::UNPROCESSABLE_ENTITY,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            };
            error(status, e.to_string())
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn stats(State(svc): State<Arc<QcService>>) -> Response {
    Json(svc.state().stats()).into_response()
}

/// `/media/{sample_id}/{frames|masks}/{index}`. Paths are built from the
/// manifest, never from the URL, so nothing outside it is reachable.
async fn media(State(svc): State<Arc<QcService>>, UrlPath(rest): UrlPath<String>) -> Response {
    let not_found = || error(StatusCode::NOT_FOUND, "no such media");
    let parts: Vec<&str> = rest.split('/').collect();
    let [id, kind, index] = parts[..] else {
        return not_found();
    };
    let Ok(index) = index.parse::<usize>() else {
        return not_found();
    };
    let path = {
        let state = svc.state();
        let Some(s) = state.sample(id) else {
            return not_found();
        };
        if index >= s.frames {
            return not_found();
        }
        let base = state.base_dir();
        match kind {
            "frames" => frame_path(&resolve_ref(base, &s.record.frames_ref), index),
            "masks" => mask_path(&resolve_ref(base, &s.record.masks_ref), index),
            _ => return not_found(),
        }
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "image/png")], bytes).into_response(),
        Err(_) => not_found(),
    }
}

/// All QC endpoints, plus the reviewer UI bundle at `/` when `ui_dir` is
/// given.
pub fn qc_router(service: Arc<QcService>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/queue/next", get(next_sample))
        .route("/api/sample/{id}", get(sample))
        .route("/api/verdict", post(verdict))
        .route("/api/stats", get(stats))
        .route("/media/{*path}", get(media))
        .with_state(service);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve_qc(addr: SocketAddr, service: Arc<QcService>, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "qc service listening");
    axum::serve(listener, qc_router(service, ui_dir)).await
}
