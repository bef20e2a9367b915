//! Service configuration from `AGENTLOOM_*` environment variables.
//!
//! | variable | meaning | default |
//! |---|---|---|
//! | `AGENTLOOM_SCRIPT` | scripted backend fixture (JSONL) | |
//! | `AGENTLOOM_LLM_URL`, `_KEY`, `_MODEL` | OpenAI-compatible chat endpoint | |
//! | `AGENTLOOM_CATALOG` | tool catalog JSON | built-in catalog |
//! | `AGENTLOOM_PART_MAP` | vertex-to-part map JSON | toy map |
//! | `AGENTLOOM_SHAPE_MODEL` | shape-to-measurement model JSON | bundled model |
//! | `AGENTLOOM_TOOLS_URL` | HTTP endpoint serving every tool | seeded mocks |
//! | `AGENTLOOM_TOOL_TIMEOUT_SECS` | per-step timeout | 60 |
//! | `AGENTLOOM_MOCK_SEED` | mock tool seed | 7 |
//! | `AGENTLOOM_EMBED_URL`, `_KEY`, `_MODEL`, `_DIM` | embeddings endpoint | hashing embedder |
//! | `AGENTLOOM_DATA_DIR` | uploaded and generated artifacts | `agentloom-data` |
//! | `AGENTLOOM_EVENT_LOG` | append-only event log | none (memory only) |
//! | `AGENTLOOM_CORS` | `1` allows cross-origin requests | off |
//!
//! A script fixture takes precedence over a remote endpoint.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use agentloom_core::executor::{AdapterSet, ExecConfig, HttpToolAdapter, MockConfig};
use agentloom_core::integration::{IntegrationError, ShapeMeasurementModel, VertexPartMap};
use agentloom_core::llm::{BackendError, LlmBackend, OpenAiBackend, OpenAiConfig, ScriptedBackend};
use agentloom_core::pipeline::{Pipeline, PipelineConfig};
use agentloom_core::registry::RegistryError;
use agentloom_core::retrieval::{Embedder, RemoteEmbedder, RetrievalError, RetrievalIndex};
use agentloom_core::{ArtifactStore, ToolCatalog};

use crate::AppState;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("no language model configured; set AGENTLOOM_SCRIPT or AGENTLOOM_LLM_URL")]
    NoBackend,
    #[error("{var}: {message}")]
    Invalid { var: &'static str, message: String },
    #[error(transparent)]
    Catalog(#[from] RegistryError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("artifact store: {0}")]
    Store(String),
    #[error("event log: {0}")]
    EventLog(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub enum BackendChoice {
    Script(PathBuf),
    Remote(OpenAiConfig),
}

#[derive(Debug, Clone)]
pub struct EmbedConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub backend: Option<BackendChoice>,
    pub catalog: Option<PathBuf>,
    pub part_map: Option<PathBuf>,
    pub shape_model: Option<PathBuf>,
    pub tools_url: Option<String>,
    pub tool_timeout: Duration,
    pub mock_seed: u64,
    pub embed: Option<EmbedConfig>,
    pub data_dir: PathBuf,
    pub event_log: Option<PathBuf>,
    pub cors: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            backend: None,
            catalog: None,
            part_map: None,
            shape_model: None,
            tools_url: None,
            tool_timeout: Duration::from_secs(60),
            mock_seed: MockConfig::default().seed,
            embed: None,
            data_dir: PathBuf::from("agentloom-data"),
            event_log: None,
            cors: false,
        }
    }
}

fn parse<T: std::str::FromStr>(var: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Invalid {
        var,
        message: e.to_string(),
    })
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let defaults = Self::default();
        let backend = match get("AGENTLOOM_SCRIPT") {
            Some(path) => Some(BackendChoice::Script(path.into())),
            None => get("AGENTLOOM_LLM_URL").map(|endpoint| {
                BackendChoice::Remote(OpenAiConfig {
                    endpoint,
                    api_key: get("AGENTLOOM_LLM_KEY"),
                    model: get("AGENTLOOM_LLM_MODEL").unwrap_or_else(|| "gpt-4".into()),
                    temperature: 0.0,
                    timeout: Duration::from_secs(120),
                })
            }),
        };
        let embed = match get("AGENTLOOM_EMBED_URL") {
            Some(endpoint) => Some(EmbedConfig {
                endpoint,
                api_key: get("AGENTLOOM_EMBED_KEY"),
                model: get("AGENTLOOM_EMBED_MODEL").unwrap_or_else(|| "text-embedding-3-small".into()),
                dim: match get("AGENTLOOM_EMBED_DIM") {
                    Some(v) => parse("AGENTLOOM_EMBED_DIM", &v)?,
                    None => {
                        return Err(ConfigError::Invalid {
                            var: "AGENTLOOM_EMBED_DIM",
                            message: "required with AGENTLOOM_EMBED_URL".into(),
                        })
                    }
                },
            }),
            None => None,
        };
        Ok(Self {
            backend,
            catalog: get("AGENTLOOM_CATALOG").map(PathBuf::from),
            part_map: get("AGENTLOOM_PART_MAP").map(PathBuf::from),
            shape_model: get("AGENTLOOM_SHAPE_MODEL").map(PathBuf::from),
            tools_url: get("AGENTLOOM_TOOLS_URL"),
            tool_timeout: match get("AGENTLOOM_TOOL_TIMEOUT_SECS") {
                Some(v) => Duration::from_secs(parse("AGENTLOOM_TOOL_TIMEOUT_SECS", &v)?),
                None => defaults.tool_timeout,
            },
            mock_seed: match get("AGENTLOOM_MOCK_SEED") {
                Some(v) => parse("AGENTLOOM_MOCK_SEED", &v)?,
                None => defaults.mock_seed,
            },
            embed,
            data_dir: get("AGENTLOOM_DATA_DIR").map(PathBuf::from).unwrap_or(defaults.data_dir),
            event_log: get("AGENTLOOM_EVENT_LOG").map(PathBuf::from),
            cors: get("AGENTLOOM_CORS").is_some_and(|v| v == "1" || v.eq_ignore_ascii_case("true")),
        })
    }

    pub fn llm_backend(&self) -> Result<Arc<dyn LlmBackend>, ConfigError> {
        match &self.backend {
            Some(BackendChoice::Script(path)) => Ok(Arc::new(ScriptedBackend::load(path)?)),
            Some(BackendChoice::Remote(config)) => Ok(Arc::new(OpenAiBackend::new(config.clone()))),
            None => Err(ConfigError::NoBackend),
        }
    }

    pub fn load_catalog(&self) -> Result<ToolCatalog, ConfigError> {
        Ok(match &self.catalog {
            Some(path) => ToolCatalog::load(path)?,
            None => ToolCatalog::builtin(),
        })
    }

    /// Loads every configured file and assembles the pipeline and state.
    pub async fn build_state(&self) -> Result<AppState, ConfigError> {
        let catalog = self.load_catalog()?;
        let backend = self.llm_backend()?;
        let part_map = match &self.part_map {
            Some(path) => VertexPartMap::load(path)?,
            None => VertexPartMap::toy(),
        };
        let shape_model = match &self.shape_model {
            Some(path) => ShapeMeasurementModel::load(path)?,
            None => ShapeMeasurementModel::bundled(),
        };
        let adapters = match &self.tools_url {
            Some(url) => {
                let mut set = AdapterSet::new();
                for card in catalog.cards() {
                    set.insert(Arc::new(HttpToolAdapter::new(&card.name, url, self.tool_timeout)));
                }
                set
            }
            None => AdapterSet::mocks(
                &catalog,
                &MockConfig {
                    seed: self.mock_seed,
                    fail_on: Vec::new(),
                    contact_len: part_map.vertex_count(),
                },
            ),
        };
        let documents = catalog.documents().to_vec();
        let mut pipeline = Pipeline::new(catalog, backend, adapters)
            .await
            .with_part_map(part_map)
            .with_shape_model(shape_model)
            .with_config(PipelineConfig {
                exec: ExecConfig {
                    step_timeout: self.tool_timeout,
                    ..ExecConfig::default()
                },
                ..PipelineConfig::default()
            });
        if let Some(embed) = &self.embed {
            let embedder: Arc<dyn Embedder> =
                Arc::new(RemoteEmbedder::new(&embed.endpoint, embed.api_key.as_deref(), &embed.model, embed.dim)?);
            let index = RetrievalIndex::build(embedder.as_ref(), &documents).await?;
            pipeline = pipeline.with_index(embedder, Some(index));
        }
        let store = ArtifactStore::open(&self.data_dir).map_err(|e| ConfigError::Store(e.to_string()))?;
        Ok(match &self.event_log {
            Some(path) => AppState::with_event_log(pipeline, store, path)?,
            None => AppState::new(pipeline, store),
        })
    }
}
