//! Annotation service: leased task queue, label submission, progress and
//! agreement reports, and static post images.
//!
//! Every error response is `{"error": <category>, "message": <text>}`.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use stancebench_core::annotation::{AnnotationError, AnnotationStore, TaskView};
use stancebench_core::StanceLabel;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<AnnotationStore>,
    pub image_root: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    pub message: String,
}

struct Failure(StatusCode, ApiError);

impl Failure {
    fn bad_request(message: impl Into<String>) -> Self {
        Failure(
            StatusCode::BAD_REQUEST,
            ApiError {
                error: "BadRequest".into(),
                message: message.into(),
            },
        )
    }

    fn not_found(message: impl Into<String>) -> Self {
        Failure(
            StatusCode::NOT_FOUND,
            ApiError {
                error: "NotFound".into(),
                message: message.into(),
            },
        )
    }
}

impl From<AnnotationError> for Failure {
    fn from(e: AnnotationError) -> Self {
        let status = match &e {
            AnnotationError::LeaseInvalid { .. } | AnnotationError::AlreadyLabeled { .. } => StatusCode::CONFLICT,
            AnnotationError::UnknownInstance(_) | AnnotationError::UnknownThread(_) => StatusCode::NOT_FOUND,
            AnnotationError::Log { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Failure(
            status,
            ApiError {
                error: e.name().into(),
                message: e.to_string(),
            },
        )
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

/// Body of `GET /api/tasks/next`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTask {
    Task { task: TaskView },
    NoTask,
}

#[derive(Debug, Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

impl AnnotatorQuery {
    fn id(self) -> Result<String, Failure> {
        self.annotator
            .filter(|a| !a.trim().is_empty())
            .ok_or_else(|| Failure::bad_request("missing `annotator` query parameter"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelBody {
    pub label: StanceLabel,
    #[serde(default)]
    pub vision_related: bool,
}

async fn next_task(State(state): State<AppState>, Query(q): Query<AnnotatorQuery>) -> Result<Json<NextTask>, Failure> {
    let annotator = q.id()?;
    Ok(Json(match state.store.next_task(&annotator) {
        Some(task) => NextTask::Task { task },
        None => NextTask::NoTask,
    }))
}

async fn submit_label(
    State(state): State<AppState>,
    UrlPath(instance_id): UrlPath<String>,
    Query(q): Query<AnnotatorQuery>,
    body: Result<Json<LabelBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, Failure> {
    let annotator = q.id()?;
    let Json(body) = body.map_err(|e| Failure::bad_request(e.body_text()))?;
    let record = state
        .store
        .submit_label(&annotator, &instance_id, body.label, body.vision_related)?;
    log::info!("{annotator} labeled {instance_id} as {} ({:?})", body.label.as_str(), record.round);
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn thread(State(state): State<AppState>, UrlPath(thread_id): UrlPath<String>) -> Result<Response, Failure> {
    Ok(Json(state.store.thread(&thread_id)?).into_response())
}

async fn progress(State(state): State<AppState>) -> Response {
    Json(state.store.progress()).into_response()
}

async fn agreement(State(state): State<AppState>) -> Response {
    Json(state.store.agreement()).into_response()
}

/// Joins `rel` onto `root`, refusing anything but plain relative components.
fn contained(root: &Path, rel: &str) -> Option<PathBuf> {
    let rel = Path::new(rel);
    rel.components()
        .all(|c| matches!(c, Component::Normal(_)))
        .then(|| root.join(rel))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

async fn image(State(state): State<AppState>, UrlPath(rel): UrlPath<String>) -> Result<Response, Failure> {
    let path = contained(&state.image_root, &rel).ok_or_else(|| Failure::bad_request("invalid image path"))?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| Failure::not_found(format!("image `{rel}`")))?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/tasks/{instance_id}/label", post(submit_label))
        .route("/api/threads/{thread_id}", get(thread))
        .route("/api/progress", get(progress))
        .route("/api/agreement", get(agreement))
        .route("/img/{*path}", get(image))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
