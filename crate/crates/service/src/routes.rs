use std::convert::Infallible;
use std::sync::Arc;

use agentloom_core::events::TurnEvent;
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;

use crate::log::LogLine;
use crate::sessions::{Session, TurnGuard};
use crate::AppState;

const MAX_UPLOAD: usize = 32 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
enum ApiError {
    #[error("no session {0:?}")]
    SessionNotFound(String),
    #[error("session {0:?} is already running a turn")]
    SessionBusy(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("no artifact {0:?}")]
    ArtifactNotFound(String),
    #[error("unsupported content type {0:?}")]
    UnsupportedMedia(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ApiError::SessionNotFound(_) => (StatusCode::NOT_FOUND, "session_not_found"),
            ApiError::SessionBusy(_) => (StatusCode::CONFLICT, "session_busy"),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::ArtifactNotFound(_) => (StatusCode::NOT_FOUND, "artifact_not_found"),
            ApiError::UnsupportedMedia(_) => (StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type"),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        (status, Json(json!({"error": {"code": code, "message": self.to_string()}}))).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/v1/catalog", get(catalog))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_summary))
        .route("/v1/sessions/{id}/events", get(session_events))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/artifacts", post(upload_artifact).layer(DefaultBodyLimit::max(MAX_UPLOAD)))
        .route("/v1/artifacts/{id}", get(fetch_artifact))
        .with_state(state)
}

async fn catalog(State(app): State<AppState>) -> Json<Value> {
    Json(json!({"tools": app.inner.pipeline.catalog().cards()}))
}

async fn create_session(State(app): State<AppState>) -> (StatusCode, Json<Value>) {
    let session = app.inner.sessions.create();
    if let Some(log) = &app.inner.log {
        log.append(&LogLine::Created {
            session: session.id.clone(),
            at_ms: session.created_at_ms,
        });
    }
    (StatusCode::CREATED, Json(json!({"id": session.id})))
}

fn find(app: &AppState, id: &str) -> Result<Arc<Session>, ApiError> {
    app.inner.sessions.get(id).ok_or_else(|| ApiError::SessionNotFound(id.to_string()))
}

async fn session_summary(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let summary = find(&app, &id)?.summary();
    Ok(Json(serde_json::to_value(summary).map_err(|e| ApiError::Internal(e.to_string()))?))
}

async fn session_events(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let turns = find(&app, &id)?.snapshot().turns;
    Ok(Json(json!({"turns": turns})))
}

#[derive(Debug, Deserialize)]
struct MessageRequest {
    text: String,
    #[serde(default)]
    image_ids: Vec<String>,
}

async fn post_message(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(request): Json<MessageRequest>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let session = find(&app, &id)?;
    let text = request.text.trim().to_string();
    if text.is_empty() {
        return Err(ApiError::BadRequest("message text is empty".into()));
    }
    for image in &request.image_ids {
        match app.inner.store.resolve(image) {
            Ok(Some(_)) => {}
            _ => return Err(ApiError::BadRequest(format!("unknown image id {image:?}"))),
        }
    }
    let guard = session.try_begin().ok_or_else(|| ApiError::SessionBusy(id.clone()))?;

    // The turn runs detached so a dropped connection cannot leave the
    // session half-updated.
    let (tx, rx) = mpsc::unbounded_channel();
    tokio::spawn(run_turn(app, session, guard, text, request.image_ids, tx));

    let stream = futures::stream::unfold(rx, |mut rx| async move {
        let event = rx.recv().await?;
        Some((Ok(sse_event(&event)), rx))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

fn sse_event(event: &TurnEvent) -> Event {
    let data = serde_json::to_string(event).unwrap_or_else(|e| json!({"seq": event.seq, "encode_error": e.to_string()}).to_string());
    Event::default().event(event.body.kind()).id(event.seq.to_string()).data(data)
}

async fn run_turn(
    app: AppState,
    session: Arc<Session>,
    guard: TurnGuard,
    text: String,
    new_images: Vec<String>,
    tx: mpsc::UnboundedSender<TurnEvent>,
) {
    let committed = session.snapshot();
    let turn = committed.turns.len();
    let mut state = committed.state;
    let mut images = committed.images;
    for image in &new_images {
        if !images.contains(image) {
            images.push(image.clone());
        }
    }
    let log = app.inner.log.as_ref();
    if let Some(log) = log {
        log.append(&LogLine::Message {
            session: session.id.clone(),
            turn,
            text: text.clone(),
            image_ids: new_images,
        });
    }

    let mut events = Vec::new();
    let mut sink = |event: TurnEvent| {
        if let Some(log) = log {
            log.append(&LogLine::Event {
                session: session.id.clone(),
                turn,
                event: event.clone(),
            });
        }
        // the client may have gone away; the turn still completes
        let _ = tx.send(event.clone());
        events.push(event);
    };
    app.inner.pipeline.run_turn(&mut state, &text, &images, &mut sink).await;

    let history = state.history.clone();
    let backend_calls = state.backend_calls;
    let at_ms = session.commit(&guard, state, images.clone(), events);
    if let Some(log) = log {
        log.append(&LogLine::Commit {
            session: session.id.clone(),
            turn,
            history,
            backend_calls,
            images,
            at_ms,
        });
    }
    drop(guard);
}

fn extension_for(content_type: &str) -> Option<&'static str> {
    match content_type.split(';').next().unwrap_or_default().trim() {
        "image/png" => Some("png"),
        "image/jpeg" | "image/jpg" => Some("jpg"),
        "image/webp" => Some("webp"),
        "image/gif" => Some("gif"),
        "image/bmp" => Some("bmp"),
        _ => None,
    }
}

fn content_type_for(id: &str) -> &'static str {
    match id.rsplit_once('.').map(|(_, ext)| ext) {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        Some("mp4") => "video/mp4",
        _ => "application/octet-stream",
    }
}

async fn upload_artifact(
    State(app): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let content_type = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or_default();
    let ext = extension_for(content_type).ok_or_else(|| ApiError::UnsupportedMedia(content_type.to_string()))?;
    if body.is_empty() {
        return Err(ApiError::BadRequest("empty upload".into()));
    }
    let store = app.inner.store.clone();
    let id = tokio::task::spawn_blocking(move || store.put(&body, ext))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok((StatusCode::CREATED, Json(json!({"image_id": id}))))
}

async fn fetch_artifact(State(app): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let path = match app.inner.store.resolve(&id) {
        Ok(Some(path)) => path,
        _ => return Err(ApiError::ArtifactNotFound(id)),
    };
    let bytes = tokio::fs::read(&path).await.map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, content_type_for(&id))], bytes).into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upload_types() {
        assert_eq!(extension_for("image/jpeg"), Some("jpg"));
        assert_eq!(extension_for("image/png; charset=binary"), Some("png"));
        assert_eq!(extension_for("text/plain"), None);
        assert_eq!(content_type_for("img-00.jpg"), "image/jpeg");
        assert_eq!(content_type_for("gen-ab.png"), "image/png");
    }
}
