//! Tools served over HTTP.
//!
//! Request: `POST {"tool": name, "args": {name: {"kind": k, "value": v}}}`.
//! Reply: `{"kind": k, "value": v, "error": null | {"code", "message"}}`.

use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;

use super::mock::family_of;
use super::{ToolAdapter, ToolArgs, ToolError};
use crate::artifact::ArtifactValue;

#[derive(Debug, Clone)]
pub struct HttpToolAdapter {
    tool: String,
    endpoint: String,
    expected_kind: Option<&'static str>,
    timeout: Duration,
    client: reqwest::Client,
}

#[derive(Deserialize)]
struct RemoteError {
    #[serde(default)]
    code: Option<serde_json::Value>,
    #[serde(default)]
    message: String,
}

#[derive(Deserialize)]
struct RemoteReply {
    #[serde(default)]
    error: Option<RemoteError>,
    #[serde(flatten)]
    rest: serde_json::Map<String, serde_json::Value>,
}

impl HttpToolAdapter {
    /// The expected output kind defaults to the built-in family of `tool`.
    pub fn new(tool: &str, endpoint: &str, timeout: Duration) -> Self {
        Self {
            tool: tool.to_string(),
            endpoint: endpoint.to_string(),
            expected_kind: Some(family_of(tool).output_kind()),
            timeout,
            client: reqwest::Client::new(),
        }
    }

    /// `None` accepts any artifact kind.
    pub fn with_expected_kind(mut self, kind: Option<&'static str>) -> Self {
        self.expected_kind = kind;
        self
    }
}

#[async_trait]
impl ToolAdapter for HttpToolAdapter {
    fn tool_name(&self) -> &str {
        &self.tool
    }

    async fn invoke(&self, args: &ToolArgs) -> Result<ArtifactValue, ToolError> {
        let body = serde_json::json!({"tool": self.tool, "args": args});
        let response = self
            .client
            .post(&self.endpoint)
            .timeout(self.timeout)
            .json(&body)
            .send()
            .await
            .map_err(|e| self.transport(e))?;
        let status = response.status();
        if !status.is_success() {
            let message = response.text().await.unwrap_or_default();
            return Err(ToolError::ToolUnavailable {
                status: Some(status.as_u16()),
                message,
            });
        }
        let bytes = response.bytes().await.map_err(|e| self.transport(e))?;
        let reply: RemoteReply =
            serde_json::from_slice(&bytes).map_err(|e| ToolError::ToolProtocolError(e.to_string()))?;
        if let Some(err) = reply.error {
            let code = err.code.map(|c| c.to_string()).unwrap_or_default();
            return Err(ToolError::ToolUnavailable {
                status: None,
                message: format!("{code} {}", err.message).trim().to_string(),
            });
        }
        let value: ArtifactValue = serde_json::from_value(serde_json::Value::Object(reply.rest))
            .map_err(|e| ToolError::ToolProtocolError(e.to_string()))?;
        match self.expected_kind {
            Some(kind) if kind != value.kind() => Err(ToolError::ToolProtocolError(format!(
                "{} returned {}, expected {kind}",
                self.tool,
                value.kind()
            ))),
            _ => Ok(value),
        }
    }
}

impl HttpToolAdapter {
    fn transport(&self, e: reqwest::Error) -> ToolError {
        if e.is_timeout() {
            ToolError::ToolTimeout(self.timeout)
        } else {
            ToolError::ToolUnavailable {
                status: e.status().map(|s| s.as_u16()),
                message: e.to_string(),
            }
        }
    }
}
