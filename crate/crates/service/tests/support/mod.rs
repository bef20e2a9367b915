//! Helpers for driving a live service over HTTP.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use agentloom_core::executor::{AdapterSet, MockConfig};
use agentloom_core::llm::LlmBackend;
use agentloom_core::pipeline::Pipeline;
use agentloom_core::{ArtifactStore, ToolCatalog};
use agentloom_service::{router, AppState};
use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Built-in catalog, seed-7 mocks and the toy part map.
pub async fn pipeline(backend: Arc<dyn LlmBackend>) -> Pipeline {
    let catalog = ToolCatalog::builtin();
    let adapters = AdapterSet::mocks(&catalog, &MockConfig::default());
    Pipeline::new(catalog, backend, adapters).await
}

pub async fn state(backend: Arc<dyn LlmBackend>, data_dir: &Path) -> AppState {
    AppState::new(pipeline(backend).await, ArtifactStore::open(data_dir).unwrap())
}

pub async fn spawn(state: AppState) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    format!("http://{addr}")
}

pub async fn create_session(base: &str) -> String {
    let reply: Value = reqwest::Client::new()
        .post(format!("{base}/v1/sessions"))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    reply["id"].as_str().unwrap().to_string()
}

pub async fn upload(base: &str, bytes: &'static [u8], content_type: &str) -> reqwest::Response {
    reqwest::Client::new()
        .post(format!("{base}/v1/artifacts"))
        .header("content-type", content_type)
        .body(bytes)
        .send()
        .await
        .unwrap()
}

pub async fn post_message(base: &str, session: &str, text: &str, images: &[String]) -> reqwest::Response {
    reqwest::Client::new()
        .post(format!("{base}/v1/sessions/{session}/messages"))
        .json(&json!({"text": text, "image_ids": images}))
        .send()
        .await
        .unwrap()
}

/// `(event name, data)` for every SSE event in `body`.
pub fn parse_sse(body: &str) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    for block in body.replace("\r\n", "\n").split("\n\n") {
        let mut name = String::from("message");
        let mut data = Vec::new();
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                name = v.trim().to_string();
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push(v.strip_prefix(' ').unwrap_or(v));
            }
        }
        if !data.is_empty() {
            out.push((name, serde_json::from_str(&data.join("\n")).unwrap()));
        }
    }
    out
}

/// Posts a message and returns the turn's events.
pub async fn turn(base: &str, session: &str, text: &str, images: &[String]) -> Vec<Value> {
    let response = post_message(base, session, text, images).await;
    assert_eq!(response.status(), 200, "{text}");
    let body = response.text().await.unwrap();
    parse_sse(&body)
        .into_iter()
        .map(|(name, event)| {
            assert_eq!(event["kind"], name.as_str());
            event
        })
        .collect()
}

pub fn kinds(events: &[Value]) -> Vec<&str> {
    events.iter().map(|e| e["kind"].as_str().unwrap()).collect()
}
