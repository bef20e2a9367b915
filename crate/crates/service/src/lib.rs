//! HTTP front end for the agent loop.
//!
//! Sessions live in memory. Posting a message starts a turn and returns
//! its events as a server-sent event stream, one JSON `TurnEvent` per SSE
//! `data` line, with the event kind as the SSE event name. A session runs
//! at most one turn at a time; history is committed when the turn ends.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/v1/sessions` | | `{"id"}` |
//! | GET | `/v1/sessions/{id}` | | session summary |
//! | GET | `/v1/sessions/{id}/events` | | events of every finished turn |
//! | POST | `/v1/sessions/{id}/messages` | `{"text", "image_ids"}` | SSE stream |
//! | POST | `/v1/artifacts` | raw image bytes | `{"image_id"}` |
//! | GET | `/v1/artifacts/{id}` | | image bytes |
//! | GET | `/v1/catalog` | | `{"tools": [...]}` |
//! | GET | `/health` | | `{"status": "ok"}` |

pub mod config;
mod log;
mod routes;
mod sessions;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use agentloom_core::pipeline::Pipeline;
use agentloom_core::ArtifactStore;

pub use config::{ConfigError, ServiceConfig};
pub use log::{EventLog, LogLine};
pub use routes::router;
pub use sessions::SessionSummary;

use sessions::SessionStore;

/// Shared state behind the router.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    pipeline: Pipeline,
    store: ArtifactStore,
    sessions: SessionStore,
    log: Option<EventLog>,
}

impl AppState {
    /// The pipeline is given `store` so generated placeholders resolve
    /// through `/v1/artifacts`.
    pub fn new(pipeline: Pipeline, store: ArtifactStore) -> Self {
        Self::build(pipeline, store, None)
    }

    /// Appends every event to `path` and restores the sessions already
    /// recorded there.
    pub fn with_event_log(pipeline: Pipeline, store: ArtifactStore, path: &Path) -> std::io::Result<Self> {
        let (log, restored) = EventLog::open(path)?;
        let state = Self::build(pipeline, store, Some(log));
        state.inner.sessions.restore(restored);
        Ok(state)
    }

    fn build(pipeline: Pipeline, store: ArtifactStore, log: Option<EventLog>) -> Self {
        Self {
            inner: Arc::new(Inner {
                pipeline: pipeline.with_store(store.clone()),
                store,
                sessions: SessionStore::default(),
                log,
            }),
        }
    }
}

/// The router, optionally allowing cross-origin requests for a browser UI
/// served from elsewhere.
pub fn app(state: AppState, cors: bool) -> axum::Router {
    let router = router(state);
    if cors {
        router.layer(tower_http::cors::CorsLayer::permissive())
    } else {
        router
    }
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, app: axum::Router) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
