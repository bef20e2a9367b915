//! The `agentloom` binary, run as a subprocess.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::Arc;
use std::time::Duration;

use agentloom_client::Client;
use agentloom_core::executor::{AdapterSet, MockConfig};
use agentloom_core::llm::ScriptedBackend;
use agentloom_core::pipeline::Pipeline;
use agentloom_core::{ArtifactStore, ToolCatalog};
use agentloom_service::{router, AppState};
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_agentloom"));
    for var in ["AGENTLOOM_LLM_URL", "AGENTLOOM_SCRIPT", "AGENTLOOM_SERVER", "AGENTLOOM_ADDR"] {
        cmd.env_remove(var);
    }
    cmd
}

fn bench_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/bench").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn bench_replay_reports_perfect_scores() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = run(bin().args(["bench", "--dataset"]).arg(bench_fixture("bench50.jsonl")).args([
        "--backend",
        &format!("scripted:{}", bench_fixture("replay.jsonl").display()),
        "--out",
        report.to_str().unwrap(),
    ]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for metric in ["sr_t", "sr_act", "sr_args", "sr", "iou"] {
        assert_eq!(written[metric], 1.0, "{metric}");
    }
    assert_eq!(written["n"], 50);
    let dump = std::fs::read_to_string(dir.path().join("report.json.dump.jsonl")).unwrap();
    assert_eq!(dump.lines().count(), 51);
    assert!(String::from_utf8_lossy(&out.stdout).contains("all"));
}

#[test]
fn bench_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let replay = format!("scripted:{}", bench_fixture("replay.jsonl").display());

    let missing = run(bin().args(["--format", "json", "bench", "--dataset", "/nonexistent.jsonl", "--backend", &replay, "--out"]).arg(&report));
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr_json(&missing)["error"]["kind"], "input");

    let dataset = bench_fixture("bench50.jsonl");
    let remote = run(bin().args(["--format", "json", "bench", "--backend", "remote", "--dataset"]).arg(&dataset).arg("--out").arg(&report));
    assert_eq!(remote.status.code(), Some(3));
    assert_eq!(stderr_json(&remote)["error"]["kind"], "backend");

    let bad_fixture = dir.path().join("bad.jsonl");
    std::fs::write(&bad_fixture, "not json\n").unwrap();
    let broken = run(bin()
        .args(["bench", "--dataset"])
        .arg(&dataset)
        .arg("--backend")
        .arg(format!("scripted:{}", bad_fixture.display()))
        .arg("--out")
        .arg(&report));
    assert_eq!(broken.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&broken.stderr).starts_with("error: "));

    let down = dir.path().join("down.jsonl");
    std::fs::write(&down, "{\"error\": \"down\"}\n").unwrap();
    let outage = run(bin().args(["bench", "--dataset"]).arg(&dataset).arg("--backend").arg(format!("scripted:{}", down.display())).arg("--out").arg(&report));
    assert_eq!(outage.status.code(), Some(3));
    assert!(report.exists(), "the report is still written");

    let usage = run(bin().args(["bench", "--dataset"]).arg(&dataset).args(["--backend", "magic", "--out"]).arg(&report));
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn build_docs_offline_prints_the_prompt() {
    let dir = tempfile::tempdir().unwrap();
    let paper = dir.path().join("paper.txt");
    std::fs::write(&paper, "We present PoseFix, a method that corrects 3D poses from text.").unwrap();
    let out = run(bin().args(["build-docs", "--tool", "Text-based Pose Editing", "--paper-text"]).arg(&paper));
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("You are an AI visual assistant"));
    assert!(stdout.trim_end().ends_with("We present PoseFix, a method that corrects 3D poses from text."));

    let missing = run(bin().args(["build-docs", "--tool", "X", "--paper-text", "/nonexistent.txt"]));
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn build_docs_with_a_backend_writes_a_draft() {
    let dir = tempfile::tempdir().unwrap();
    let paper = dir.path().join("paper.txt");
    std::fs::write(&paper, "PoseFix corrects 3D poses from text.").unwrap();
    let script = dir.path().join("script.jsonl");
    let reply = "description=\"PoseFix is a tool to correct a 3D pose from text. Useful when you want to adjust a pose. Like: bend his knees.\"\n\nPossible queries:\n1. Make the runner in this photo bend her knees more.\n2. Have the man in the picture raise his right hand.";
    std::fs::write(&script, format!("{}\n", serde_json::json!({"completion": reply}))).unwrap();
    let draft_path = dir.path().join("draft.json");
    let out = run(bin()
        .args(["build-docs", "--tool", "Text-based Pose Editing", "--paper-text"])
        .arg(&paper)
        .arg("--backend")
        .arg(format!("scripted:{}", script.display()))
        .arg("--out")
        .arg(&draft_path));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let draft: Value = serde_json::from_str(&std::fs::read_to_string(&draft_path).unwrap()).unwrap();
    assert_eq!(draft["document"]["tool_name"], "Text-based Pose Editing");
    let pairs = draft["document"]["qa_pairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 2);
    assert_eq!(pairs[1]["invocation"]["action_input"], "example.jpg; Have the man in the picture raise his right hand");

    std::fs::write(&script, format!("{}\n", serde_json::json!({"completion": "I cannot help with that."}))).unwrap();
    let empty = run(bin()
        .args(["build-docs", "--tool", "T", "--paper-text"])
        .arg(&paper)
        .arg("--backend")
        .arg(format!("scripted:{}", script.display())));
    assert_eq!(empty.status.code(), Some(2));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn chat_talks_to_the_service() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = ToolCatalog::builtin();
    let adapters = AdapterSet::mocks(&catalog, &MockConfig::default());
    let backend = ScriptedBackend::always("Thought: Do I need to use a tool? No\nAI: Hello from the agent.");
    let pipeline = Pipeline::new(catalog, Arc::new(backend), adapters).await;
    let state = AppState::new(pipeline, ArtifactStore::open(dir.path()).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });

    let server = base.clone();
    let out = tokio::task::spawn_blocking(move || {
        let mut child = bin()
            .args(["--format", "json", "chat", "--server", &server])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        child.stdin.take().unwrap().write_all(b"hi there\n\n/quit\n").unwrap();
        child.wait_with_output().unwrap()
    })
    .await
    .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let events: Vec<Value> = String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(events.last().unwrap()["payload"]["text"], "Hello from the agent.");

    let unreachable = run(bin().args(["chat", "--server", "http://127.0.0.1:9"]));
    assert_eq!(unreachable.status.code(), Some(3));
}

#[tokio::test]
async fn serve_starts_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.jsonl");
    std::fs::write(&script, "{\"completion\": \"Thought: Do I need to use a tool? No\\nAI: ok\"}\n").unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = bin()
        .args(["serve", "--addr", &format!("127.0.0.1:{port}")])
        .env("AGENTLOOM_SCRIPT", &script)
        .env("AGENTLOOM_DATA_DIR", dir.path().join("data"))
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let client = Client::new(&format!("http://127.0.0.1:{port}"));
    let mut up = false;
    for _ in 0..100 {
        if client.health().await.is_ok() {
            up = true;
            break;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    let answer = if up {
        let session = client.create_session().await.unwrap();
        let events = client.send_message(&session, "hello", &[], |_| {}).await.unwrap();
        Some(events.last().unwrap().clone())
    } else {
        None
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(up, "service did not come up");
    assert!(matches!(answer.unwrap().body, agentloom_core::events::EventBody::Answer(a) if a.text == "ok"));

    let no_backend = run(bin().args(["serve", "--addr", "127.0.0.1:0"]).env("AGENTLOOM_DATA_DIR", dir.path().join("data")));
    assert_eq!(no_backend.status.code(), Some(3));
}
