//! `agentloom` command-line tool.
//!
//! Exit codes: 0 success, 2 dataset or parse errors (including bad
//! arguments), 3 language-model backend errors, 1 anything else.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use agentloom_client::{image_content_type, render, Client, ClientError};
use agentloom_core::evalharness::{
    check_against_catalog, load_dataset, parse_toolcard_reply, render_generation_prompt, run_benchmark, BenchConfig,
    BenchContext, GenerationPromptSpec, TemplateId,
};
use agentloom_core::llm::{complete_with_timeout, CompletionRequest, LlmBackend, OpenAiBackend, OpenAiConfig, ScriptedBackend};
use agentloom_core::registry::{ArgKind, ArgSpec};
use agentloom_core::retrieval::{HashingEmbedder, RetrievalIndex};
use agentloom_core::ToolCatalog;
use agentloom_service::{ConfigError, ServiceConfig};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tokio::io::{AsyncBufReadExt, BufReader};

#[derive(Parser)]
#[command(name = "agentloom", version, about = "Tool-using LLM agent: benchmark, chat, document building, service")]
struct Cli {
    /// Output format for results and errors.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Score planner emissions against a benchmark dataset.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        /// Tool catalog JSON; the built-in catalog when omitted.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// `scripted:<fixture.jsonl>` or `remote` (reads AGENTLOOM_LLM_*).
        #[arg(long)]
        backend: String,
        /// Where to write the metric report (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Where to write the per-turn dump; defaults to `<out>.dump.jsonl`.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Plan without a retrieved example.
        #[arg(long)]
        no_retrieval: bool,
        /// Argument score needed for a turn to count as a success.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Chat with a running service.
    Chat {
        #[arg(long, env = "AGENTLOOM_SERVER", default_value = "http://127.0.0.1:8080")]
        server: String,
        /// Resume an existing session instead of starting one.
        #[arg(long)]
        session: Option<String>,
        /// Image to attach to the first message; repeatable.
        #[arg(long)]
        image: Vec<PathBuf>,
    },
    /// Draft a tool document from a method paper.
    BuildDocs {
        /// Plain-text paper.
        #[arg(long)]
        paper_text: PathBuf,
        /// Tool name the queries are filed under.
        #[arg(long)]
        tool: String,
        /// Without a backend the rendered prompt is printed instead.
        #[arg(long)]
        backend: Option<String>,
        /// Catalog used to look up the tool's arguments.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Write the draft here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service, configured from AGENTLOOM_* variables.
    Serve {
        #[arg(long, env = "AGENTLOOM_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

enum CliError {
    Input(String),
    Backend(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Backend(_) => "backend",
            CliError::Other(_) => "other",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Backend(m) | CliError::Other(m) => m,
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api { status, .. } if (400..500).contains(&status) => CliError::Input(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Other(format!("{}: {e}", path.display()))
}

fn load_catalog(path: Option<&Path>) -> Result<ToolCatalog, CliError> {
    match path {
        Some(p) => ToolCatalog::load(p).map_err(|e| CliError::Input(e.to_string())),
        None => Ok(ToolCatalog::builtin()),
    }
}

fn backend(spec: &str) -> Result<Arc<dyn LlmBackend>, CliError> {
    if let Some(path) = spec.strip_prefix("scripted:") {
        let scripted = ScriptedBackend::load(path).map_err(|e| CliError::Backend(e.to_string()))?;
        return Ok(Arc::new(scripted));
    }
    if spec == "remote" {
        let config = OpenAiConfig::from_env().ok_or_else(|| CliError::Backend("AGENTLOOM_LLM_URL is not set".into()))?;
        return Ok(Arc::new(OpenAiBackend::new(config)));
    }
    Err(CliError::Input(format!("--backend must be scripted:<file> or remote, got {spec:?}")))
}

#[allow(clippy::too_many_arguments)]
async fn bench(
    format: Format,
    dataset: &Path,
    catalog: Option<&Path>,
    backend_spec: &str,
    out: &Path,
    dump: Option<&Path>,
    no_retrieval: bool,
    threshold: Option<f64>,
) -> Result<(), CliError> {
    let catalog = load_catalog(catalog)?;
    let records = load_dataset(dataset).map_err(|e| CliError::Input(e.to_string()))?;
    check_against_catalog(&records, &catalog).map_err(|e| CliError::Input(e.to_string()))?;
    let backend = backend(backend_spec)?;
    let embedder = HashingEmbedder::default();
    let index = if no_retrieval || catalog.documents().is_empty() {
        None
    } else {
        Some(RetrievalIndex::build(&embedder, catalog.documents()).await.map_err(|e| CliError::Other(e.to_string()))?)
    };
    let mut config = BenchConfig::default();
    if let Some(t) = threshold {
        config.success_threshold = t;
    }
    let ctx = BenchContext {
        catalog: &catalog,
        backend: backend.as_ref(),
        index: index.as_ref().map(|i| (i, &embedder as &dyn agentloom_core::retrieval::Embedder)),
        config,
    };
    let output = run_benchmark(&ctx, &records).await.map_err(|e| CliError::Input(e.to_string()))?;
    let dump_path = dump.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".dump.jsonl");
        PathBuf::from(p)
    });
    output.write(out, &dump_path).map_err(|e| io_error(out, e))?;
    match format {
        Format::Text => print!("{}", output.report.table()),
        Format::Json => println!("{}", serde_json::to_string(&output.report).unwrap_or_default()),
    }
    let failed = output
        .entries
        .iter()
        .filter(|e| e.prediction.parse_error.as_deref().is_some_and(|m| m.starts_with("backend:")))
        .count();
    if failed == output.entries.len() {
        let first = output.entries.first().and_then(|e| e.prediction.parse_error.clone()).unwrap_or_default();
        return Err(CliError::Backend(format!("every completion failed; first: {first}")));
    }
    Ok(())
}

async fn build_docs(
    paper: &Path,
    tool: &str,
    backend_spec: Option<&str>,
    catalog: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let paper_text = std::fs::read_to_string(paper).map_err(|e| CliError::Input(format!("{}: {e}", paper.display())))?;
    let spec = GenerationPromptSpec::new(TemplateId::ToolcardFromPaper).slot("paper_text", &paper_text);
    let prompt = render_generation_prompt(&spec).map_err(|e| CliError::Other(e.to_string()))?;
    let Some(spec) = backend_spec else {
        print!("{prompt}");
        if !prompt.ends_with('\n') {
            println!();
        }
        return Ok(());
    };
    let backend = backend(spec)?;
    let catalog = load_catalog(catalog)?;
    let args = match catalog.card(tool) {
        Some(card) => card.args.clone(),
        None => vec![ArgSpec::new("image", ArgKind::FileRef, "path of the input image")],
    };
    let reply = complete_with_timeout(backend.as_ref(), &CompletionRequest::new(prompt), Duration::from_secs(300))
        .await
        .map_err(|e| CliError::Backend(e.to_string()))?;
    let draft = parse_toolcard_reply(&reply, tool, &args);
    if draft.document.qa_pairs.is_empty() {
        return Err(CliError::Input("the reply contained no numbered queries".into()));
    }
    let text = serde_json::to_string_pretty(&draft).map_err(|e| CliError::Other(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|e| io_error(path, e))?,
        None => println!("{text}"),
    }
    Ok(())
}

async fn upload(client: &Client, path: &Path) -> Result<String, CliError> {
    let content_type = image_content_type(path)
        .ok_or_else(|| CliError::Input(format!("{}: not a png, jpeg, webp, gif or bmp image", path.display())))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(client.upload_image(bytes, content_type).await?)
}

async fn chat(format: Format, server: &str, session: Option<String>, images: &[PathBuf]) -> Result<(), CliError> {
    let client = Client::new(server);
    client.health().await?;
    let session = match session {
        Some(id) => client.session(&id).await?.id,
        None => client.create_session().await?,
    };
    let mut attached = Vec::new();
    for path in images {
        attached.push(upload(&client, path).await?);
    }
    if format == Format::Text {
        eprintln!("session {session}; /image <path> attaches an image, /quit leaves");
    }
    let mut lines = BufReader::new(tokio::io::stdin()).lines();
    loop {
        if format == Format::Text {
            eprint!("> ");
            let _ = std::io::stderr().flush();
        }
        let Some(line) = lines.next_line().await.map_err(|e| CliError::Other(e.to_string()))? else {
            break;
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "/quit" {
            break;
        }
        if let Some(path) = line.strip_prefix("/image ") {
            match upload(&client, Path::new(path.trim())).await {
                Ok(id) => {
                    eprintln!("attached {id}");
                    attached.push(id);
                }
                Err(e) => eprintln!("{}", e.message()),
            }
            continue;
        }
        let images = std::mem::take(&mut attached);
        client
            .send_message(&session, line, &images, |event| match format {
                Format::Text => {
                    if let Some(text) = render::event(event) {
                        println!("{text}");
                    }
                }
                Format::Json => println!("{}", serde_json::to_string(event).unwrap_or_default()),
            })
            .await?;
    }
    Ok(())
}

async fn serve(addr: SocketAddr) -> Result<(), CliError> {
    let config = ServiceConfig::from_env().map_err(config_error)?;
    let state = config.build_state().await.map_err(config_error)?;
    agentloom_service::serve(addr, agentloom_service::app(state, config.cors))
        .await
        .map_err(|e| CliError::Other(format!("{addr}: {e}")))
}

fn config_error(e: ConfigError) -> CliError {
    match e {
        ConfigError::NoBackend | ConfigError::Backend(_) => CliError::Backend(e.to_string()),
        ConfigError::Invalid { .. } | ConfigError::Catalog(_) | ConfigError::Integration(_) => CliError::Input(e.to_string()),
        _ => CliError::Other(e.to_string()),
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench {
            dataset,
            catalog,
            backend,
            out,
            dump,
            no_retrieval,
            threshold,
        } => {
            bench(
                cli.format,
                &dataset,
                catalog.as_deref(),
                &backend,
                &out,
                dump.as_deref(),
                no_retrieval,
                threshold,
            )
            .await
        }
        Command::Chat { server, session, image } => chat(cli.format, &server, session, &image).await,
        Command::BuildDocs {
            paper_text,
            tool,
            backend,
            catalog,
            out,
        } => build_docs(&paper_text, &tool, backend.as_deref(), catalog.as_deref(), out.as_deref()).await,
        Command::Serve { addr } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .with_writer(std::io::stderr)
                .init();
            serve(addr).await
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match cli.format {
                Format::Text => eprintln!("error: {}", e.message()),
                Format::Json => eprintln!("{}", json!({"error": {"kind": e.kind(), "message": e.message()}})),
            }
            ExitCode::from(e.code())
        }
    }
}
