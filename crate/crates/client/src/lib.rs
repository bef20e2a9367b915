//! Client for the agentloom HTTP service.
//!
//! [`Client`] wraps the JSON endpoints and decodes a turn's event stream
//! as it arrives. [`render`] formats events for a terminal.

pub mod render;
mod sse;

use agentloom_core::events::TurnEvent;
use agentloom_core::ToolCard;
use agentloom_service::SessionSummary;
use futures::StreamExt;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

pub use sse::{SseDecoder, SseMessage};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// The service answered with an error status.
    #[error("{status} {code}: {message}")]
    Api { status: u16, code: String, message: String },
    #[error("cannot reach the service: {0}")]
    Transport(String),
    #[error("unexpected reply from the service: {0}")]
    Protocol(String),
}

impl From<reqwest::Error> for ClientError {
    fn from(e: reqwest::Error) -> Self {
        if e.is_decode() {
            ClientError::Protocol(e.to_string())
        } else {
            ClientError::Transport(e.to_string())
        }
    }
}

#[derive(Deserialize)]
struct ErrorBody {
    error: ErrorDetail,
}

#[derive(Deserialize)]
struct ErrorDetail {
    code: String,
    message: String,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Self {
        Self {
            base: base.trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn check(response: reqwest::Response) -> Result<reqwest::Response, ClientError> {
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let text = response.text().await.unwrap_or_default();
        Err(match serde_json::from_str::<ErrorBody>(&text) {
            Ok(body) => ClientError::Api {
                status: status.as_u16(),
                code: body.error.code,
                message: body.error.message,
            },
            Err(_) => ClientError::Api {
                status: status.as_u16(),
                code: "http".into(),
                message: text,
            },
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let response = Self::check(self.http.get(self.url(path)).send().await?).await?;
        Ok(response.json().await?)
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        self.get::<serde_json::Value>("/health").await.map(|_| ())
    }

    pub async fn catalog(&self) -> Result<Vec<ToolCard>, ClientError> {
        #[derive(Deserialize)]
        struct Catalog {
            tools: Vec<ToolCard>,
        }
        Ok(self.get::<Catalog>("/v1/catalog").await?.tools)
    }

    pub async fn create_session(&self) -> Result<String, ClientError> {
        #[derive(Deserialize)]
        struct Created {
            id: String,
        }
        let response = Self::check(self.http.post(self.url("/v1/sessions")).send().await?).await?;
        Ok(response.json::<Created>().await?.id)
    }

    pub async fn session(&self, id: &str) -> Result<SessionSummary, ClientError> {
        self.get(&format!("/v1/sessions/{id}")).await
    }

    /// Uploads image bytes; `content_type` is e.g. `image/jpeg`.
    pub async fn upload_image(&self, bytes: Vec<u8>, content_type: &str) -> Result<String, ClientError> {
        #[derive(Deserialize)]
        struct Uploaded {
            image_id: String,
        }
        let request = self.http.post(self.url("/v1/artifacts")).header("content-type", content_type).body(bytes);
        let response = Self::check(request.send().await?).await?;
        Ok(response.json::<Uploaded>().await?.image_id)
    }

    pub async fn artifact(&self, id: &str) -> Result<Vec<u8>, ClientError> {
        let response = Self::check(self.http.get(self.url(&format!("/v1/artifacts/{id}"))).send().await?).await?;
        Ok(response.bytes().await?.to_vec())
    }

    /// Posts a message and calls `on_event` for each event as it arrives.
    /// Returns all events of the turn.
    pub async fn send_message(
        &self,
        session: &str,
        text: &str,
        image_ids: &[String],
        mut on_event: impl FnMut(&TurnEvent),
    ) -> Result<Vec<TurnEvent>, ClientError> {
        let request = self
            .http
            .post(self.url(&format!("/v1/sessions/{session}/messages")))
            .json(&json!({"text": text, "image_ids": image_ids}));
        let response = Self::check(request.send().await?).await?;
        let mut decoder = SseDecoder::default();
        let mut events = Vec::new();
        let mut handle = |message: SseMessage, events: &mut Vec<TurnEvent>| -> Result<(), ClientError> {
            let event: TurnEvent =
                serde_json::from_str(&message.data).map_err(|e| ClientError::Protocol(format!("{e}: {}", message.data)))?;
            on_event(&event);
            events.push(event);
            Ok(())
        };
        let mut body = response.bytes_stream();
        while let Some(chunk) = body.next().await {
            for message in decoder.push(&chunk?) {
                handle(message, &mut events)?;
            }
        }
        if let Some(message) = decoder.finish() {
            handle(message, &mut events)?;
        }
        match events.last().map(|e| e.body.kind()) {
            Some("answer") => Ok(events),
            _ => Err(ClientError::Protocol("event stream ended without an answer".into())),
        }
    }
}

/// Content type for an image path, from its extension.
pub fn image_content_type(path: &std::path::Path) -> Option<&'static str> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    Some(match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "webp" => "image/webp",
        "gif" => "image/gif",
        "bmp" => "image/bmp",
        _ => return None,
    })
}
