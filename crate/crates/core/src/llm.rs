//! Language-model backends.
//!
//! Two implementations ship: an OpenAI-compatible chat-completions client
//! and a scripted backend that replays fixture completions. The scripted
//! fixture is JSONL, one entry per line:
//!
//! ```json
//! {"match": {"record_id": "r1", "turn_index": 0}, "completion": "..."}
//! ```
//!
//! Every key present in `match` must equal the request's value
//! (`prompt_sha256` is compared against the hex SHA-256 of the prompt).
//! The first matching entry wins. An entry may carry `"error"` instead of
//! a completion to simulate an outage.

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::sha256_hex;

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Unavailable { status: Option<u16>, message: String },
    #[error("backend timed out after {0:?}")]
    Timeout(Duration),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("no scripted completion matches {0}")]
    NoScriptMatch(String),
    #[error("invalid script fixture at line {line}: {message}")]
    BadFixture { line: usize, message: String },
}

/// A completion request. `record_id` and `turn_index` identify the call for
/// scripted replay and are not sent to remote backends.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub record_id: Option<String>,
    pub turn_index: Option<usize>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            ..Self::default()
        }
    }

    pub fn with_prompt(&self, prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            ..self.clone()
        }
    }
}

#[async_trait]
pub trait LlmBackend: Send + Sync {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

pub async fn complete_with_timeout(
    backend: &dyn LlmBackend,
    request: &CompletionRequest,
    timeout: Duration,
) -> Result<String, BackendError> {
    match tokio::time::timeout(timeout, backend.complete(request)).await {
        Ok(result) => result,
        Err(_) => Err(BackendError::Timeout(timeout)),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
}

impl ScriptMatch {
    fn matches(&self, request: &CompletionRequest, prompt_hash: &str) -> bool {
        self.record_id
            .as_ref()
            .is_none_or(|id| request.record_id.as_ref() == Some(id))
            && self.turn_index.is_none_or(|t| request.turn_index == Some(t))
            && self
                .prompt_sha256
                .as_ref()
                .is_none_or(|h| h.eq_ignore_ascii_case(prompt_hash))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match", default)]
    pub when: ScriptMatch,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ScriptEntry {
    pub fn for_record(record_id: &str, completion: &str) -> Self {
        Self {
            when: ScriptMatch {
                record_id: Some(record_id.to_string()),
                ..Default::default()
            },
            completion: Some(completion.to_string()),
            error: None,
        }
    }

    pub fn for_turn(turn_index: usize, completion: &str) -> Self {
        Self {
            when: ScriptMatch {
                turn_index: Some(turn_index),
                ..Default::default()
            },
            completion: Some(completion.to_string()),
            error: None,
        }
    }
}

/// Replays canned completions; records every request it receives.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    delay: Option<Duration>,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries,
            ..Self::default()
        }
    }

    /// A backend answering every request with `completion`.
    pub fn always(completion: &str) -> Self {
        Self::new(vec![ScriptEntry {
            when: ScriptMatch::default(),
            completion: Some(completion.to_string()),
            error: None,
        }])
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn from_jsonl(text: &str) -> Result<Self, BackendError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line).map_err(|e| BackendError::BadFixture {
                line: i + 1,
                message: e.to_string(),
            })?;
            if entry.completion.is_none() && entry.error.is_none() {
                return Err(BackendError::BadFixture {
                    line: i + 1,
                    message: "entry has neither completion nor error".into(),
                });
            }
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::BadFixture {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_jsonl(&text)
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().expect("request log").clone()
    }
}

#[async_trait]
impl LlmBackend for ScriptedBackend {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.requests.lock().expect("request log").push(request.clone());
        if let Some(delay) = self.delay {
            tokio::time::sleep(delay).await;
        }
        let hash = sha256_hex(&request.prompt);
        let entry = self
            .entries
            .iter()
            .find(|e| e.when.matches(request, &hash))
            .ok_or_else(|| {
                BackendError::NoScriptMatch(format!(
                    "record_id={:?} turn_index={:?} prompt_sha256={hash}",
                    request.record_id, request.turn_index
                ))
            })?;
        match (&entry.completion, &entry.error) {
            (_, Some(message)) => Err(BackendError::Unavailable {
                status: None,
                message: message.clone(),
            }),
            (Some(completion), None) => Ok(completion.clone()),
            (None, None) => unreachable!("validated on load"),
        }
    }
}

type CompletionFn = dyn Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync;

/// A backend computed by a closure, for tests that need the prompt.
#[derive(Clone)]
pub struct FnBackend(Arc<CompletionFn>);

impl FnBackend {
    pub fn new(f: impl Fn(&CompletionRequest) -> Result<String, BackendError> + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }
}

#[async_trait]
impl LlmBackend for FnBackend {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (self.0)(request)
    }
}

#[derive(Debug, Clone)]
pub struct OpenAiConfig {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
}

impl OpenAiConfig {
    /// Reads `AGENTLOOM_LLM_URL`, `AGENTLOOM_LLM_KEY` and `AGENTLOOM_LLM_MODEL`.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var("AGENTLOOM_LLM_URL").ok()?;
        Some(Self {
            endpoint,
            api_key: std::env::var("AGENTLOOM_LLM_KEY").ok(),
            model: std::env::var("AGENTLOOM_LLM_MODEL").unwrap_or_else(|_| "gpt-4".to_string()),
            temperature: 0.0,
            timeout: Duration::from_secs(120),
        })
    }
}

/// OpenAI-compatible chat-completions client. The prompt is sent as one
/// user message; the first choice's content is returned.
pub struct OpenAiBackend {
    config: OpenAiConfig,
    client: reqwest::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

impl OpenAiBackend {
    pub fn new(config: OpenAiConfig) -> Self {
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .unwrap_or_default();
        Self { config, client }
    }
}

#[async_trait]
impl LlmBackend for OpenAiBackend {
    async fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: self.config.temperature,
        };
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().await.map_err(|e| map_transport(e, self.config.timeout))?;
        let status = response.status();
        if !status.is_success() {
            let message = response.text().await.unwrap_or_default();
            return Err(BackendError::Unavailable {
                status: Some(status.as_u16()),
                message,
            });
        }
        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("response has no choices".into()))
    }
}

pub(crate) fn map_transport(err: reqwest::Error, timeout: Duration) -> BackendError {
    if err.is_timeout() {
        BackendError::Timeout(timeout)
    } else {
        BackendError::Unavailable {
            status: err.status().map(|s| s.as_u16()),
            message: err.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn first_match_wins() {
        let backend = ScriptedBackend::from_jsonl(
            r#"{"match": {"record_id": "a"}, "completion": "first"}
{"match": {"record_id": "a"}, "completion": "second"}
{"match": {"turn_index": 1}, "completion": "turn one"}
"#,
        )
        .unwrap();
        let req = CompletionRequest {
            record_id: Some("a".into()),
            ..Default::default()
        };
        assert_eq!(backend.complete(&req).await.unwrap(), "first");
        let req = CompletionRequest {
            turn_index: Some(1),
            ..Default::default()
        };
        assert_eq!(backend.complete(&req).await.unwrap(), "turn one");
        let req = CompletionRequest {
            turn_index: Some(2),
            ..Default::default()
        };
        assert!(matches!(backend.complete(&req).await, Err(BackendError::NoScriptMatch(_))));
        assert_eq!(backend.requests().len(), 3);
    }

    #[tokio::test]
    async fn match_keys_are_conjunctive() {
        let backend = ScriptedBackend::from_jsonl(
            r#"{"match": {"record_id": "a", "turn_index": 1}, "completion": "a1"}"#,
        )
        .unwrap();
        let mut req = CompletionRequest {
            record_id: Some("a".into()),
            turn_index: Some(0),
            ..Default::default()
        };
        assert!(backend.complete(&req).await.is_err());
        req.turn_index = Some(1);
        assert_eq!(backend.complete(&req).await.unwrap(), "a1");
    }

    #[tokio::test]
    async fn prompt_hash_match() {
        let hash = sha256_hex("hello");
        let backend = ScriptedBackend::from_jsonl(&format!(
            r#"{{"match": {{"prompt_sha256": "{hash}"}}, "completion": "hi"}}"#
        ))
        .unwrap();
        assert_eq!(backend.complete(&CompletionRequest::new("hello")).await.unwrap(), "hi");
        assert!(backend.complete(&CompletionRequest::new("hello!")).await.is_err());
    }

    #[tokio::test]
    async fn scripted_outage() {
        let backend = ScriptedBackend::from_jsonl(r#"{"match": {}, "error": "connection refused"}"#).unwrap();
        assert!(matches!(
            backend.complete(&CompletionRequest::new("x")).await,
            Err(BackendError::Unavailable { .. })
        ));
    }

    #[test]
    fn fixture_errors_carry_line() {
        let err = ScriptedBackend::from_jsonl("{\"match\": {}, \"completion\": \"ok\"}\nnot json").unwrap_err();
        assert!(matches!(err, BackendError::BadFixture { line: 2, .. }));
        assert!(ScriptedBackend::from_jsonl(r#"{"match": {}}"#).is_err());
    }
}
