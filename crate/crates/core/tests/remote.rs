//! Remote adapters against local stub servers.

use std::time::Duration;

use agentloom_core::artifact::PoseParams;
use agentloom_core::executor::{HttpToolAdapter, ToolAdapter, ToolArgs, ToolError};
use agentloom_core::llm::{BackendError, CompletionRequest, LlmBackend, OpenAiBackend, OpenAiConfig};
use agentloom_core::retrieval::{Embedder, RemoteEmbedder, RetrievalError};
use agentloom_core::ArtifactValue;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

async fn serve(router: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    format!("http://{addr}")
}

fn stub() -> Router {
    Router::new()
        .route(
            "/tool/ok",
            post(|Json(body): Json<Value>| async move {
                assert_eq!(body["tool"], "Body Pose Estimation");
                assert_eq!(body["args"]["image"], json!({"kind": "image_ref", "value": "a.jpg"}));
                Json(json!({"kind": "pose_params", "value": vec![0.0; 72], "error": null}))
            }),
        )
        .route("/tool/down", post(|| async { StatusCode::SERVICE_UNAVAILABLE }))
        .route(
            "/tool/refused",
            post(|| async { Json(json!({"error": {"code": "E_NO_PERSON", "message": "no person found"}})) }),
        )
        .route("/tool/wrong", post(|| async { Json(json!({"kind": "text", "value": "hi"})) }))
        .route("/tool/garbage", post(|| async { "not json" }))
        .route(
            "/tool/slow",
            post(|| async {
                tokio::time::sleep(Duration::from_secs(2)).await;
                Json(json!({"kind": "pose_params", "value": vec![0.0; 72]}))
            }),
        )
        .route(
            "/chat",
            post(|headers: HeaderMap, Json(body): Json<Value>| async move {
                if headers.get("authorization").and_then(|v| v.to_str().ok()) != Some("Bearer good") {
                    return (StatusCode::UNAUTHORIZED, Json(json!({"error": {"message": "bad key"}})));
                }
                let prompt = body["messages"][0]["content"].as_str().unwrap_or_default().to_string();
                (StatusCode::OK, Json(json!({"choices": [{"message": {"content": format!("echo: {prompt}")}}]})))
            }),
        )
        .route(
            "/embeddings",
            post(|Json(body): Json<Value>| async move {
                let n = body["input"].as_array().map(Vec::len).unwrap_or(0);
                Json(json!({"data": (0..n).map(|i| json!({"embedding": [i as f64, 1.0, 0.0]})).collect::<Vec<_>>()}))
            }),
        )
}

fn args() -> ToolArgs {
    let mut a = ToolArgs::new();
    a.insert("image".into(), ArtifactValue::ImageRef("a.jpg".into()));
    a
}

#[tokio::test]
async fn http_tool_error_mapping() {
    let base = serve(stub()).await;
    let adapter = |path: &str| HttpToolAdapter::new("Body Pose Estimation", &format!("{base}{path}"), Duration::from_millis(300));

    assert_eq!(
        adapter("/tool/ok").invoke(&args()).await.unwrap(),
        ArtifactValue::PoseParams(PoseParams::zeros())
    );
    assert!(matches!(
        adapter("/tool/down").invoke(&args()).await,
        Err(ToolError::ToolUnavailable { status: Some(503), .. })
    ));
    match adapter("/tool/refused").invoke(&args()).await {
        Err(ToolError::ToolUnavailable { status: None, message }) => assert!(message.contains("no person found")),
        other => panic!("{other:?}"),
    }
    assert!(matches!(adapter("/tool/wrong").invoke(&args()).await, Err(ToolError::ToolProtocolError(_))));
    assert!(matches!(adapter("/tool/garbage").invoke(&args()).await, Err(ToolError::ToolProtocolError(_))));
    assert!(matches!(adapter("/tool/slow").invoke(&args()).await, Err(ToolError::ToolTimeout(_))));
    assert!(adapter("/tool/wrong").with_expected_kind(None).invoke(&args()).await.is_ok());
}

#[tokio::test]
async fn unreachable_tool_is_unavailable() {
    let adapter = HttpToolAdapter::new("Body Pose Estimation", "http://127.0.0.1:9/none", Duration::from_secs(2));
    assert!(matches!(adapter.invoke(&args()).await, Err(ToolError::ToolUnavailable { status: None, .. })));
}

fn chat(base: &str, key: &str) -> OpenAiBackend {
    OpenAiBackend::new(OpenAiConfig {
        endpoint: format!("{base}/chat"),
        api_key: Some(key.to_string()),
        model: "stub".into(),
        temperature: 0.0,
        timeout: Duration::from_secs(5),
    })
}

#[tokio::test]
async fn chat_backend_roundtrip_and_bad_key() {
    let base = serve(stub()).await;
    let reply = chat(&base, "good").complete(&CompletionRequest::new("hello")).await.unwrap();
    assert_eq!(reply, "echo: hello");
    match chat(&base, "bad").complete(&CompletionRequest::new("hello")).await {
        Err(BackendError::Unavailable { status: Some(401), .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn remote_embedder_keeps_order_and_checks_dim() {
    let base = serve(stub()).await;
    let embedder = RemoteEmbedder::new(&format!("{base}/embeddings"), None, "stub", 3).unwrap();
    let texts: Vec<String> = (0..70).map(|i| format!("t{i}")).collect();
    let out = embedder.embed_batch(&texts).await.unwrap();
    assert_eq!(out.len(), 70);
    // two chunks of 64 and 6; each restarts the stub's counter
    assert_eq!(out[65].values()[0], 1.0);
    let wrong_dim = RemoteEmbedder::new(&format!("{base}/embeddings"), None, "stub", 4).unwrap();
    assert!(matches!(wrong_dim.embed("x").await, Err(RetrievalError::DimMismatch { .. })));
    let missing = RemoteEmbedder::new(&format!("{base}/nothing"), None, "stub", 3).unwrap();
    assert!(matches!(missing.embed("x").await, Err(RetrievalError::BackendUnavailable(_))));
}
