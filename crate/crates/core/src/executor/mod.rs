//! Runs validated tool graphs against tool adapters.
//!
//! Steps execute in waves: every step whose dependencies have all resolved
//! forms the next wave, and the wave's steps run concurrently up to a
//! bounded width. Started events for a wave are reported in step-id order
//! before it runs and finished events in step-id order after it completes,
//! so the event sequence does not depend on adapter timing.

mod http;
mod mock;

pub use http::HttpToolAdapter;
pub use mock::{family_of, MockAdapter, MockConfig, ToolFamily};

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use futures::future::join_all;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::artifact::ArtifactValue;
use crate::planner::{Binding, TemplatePart, ValidatedGraph};
use crate::registry::ToolCatalog;

pub type ToolArgs = BTreeMap<String, ArtifactValue>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("scripted failure: {0}")]
    ScriptedFailure(String),
    #[error("tool unavailable{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    ToolUnavailable { status: Option<u16>, message: String },
    #[error("tool protocol error: {0}")]
    ToolProtocolError(String),
    #[error("tool timed out after {0:?}")]
    ToolTimeout(Duration),
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
}

#[async_trait]
pub trait ToolAdapter: Send + Sync {
    fn tool_name(&self) -> &str;
    async fn invoke(&self, args: &ToolArgs) -> Result<ArtifactValue, ToolError>;
}

/// Adapters by tool name.
#[derive(Clone, Default)]
pub struct AdapterSet {
    adapters: HashMap<String, Arc<dyn ToolAdapter>>,
}

impl AdapterSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// A mock adapter for every card in the catalog.
    pub fn mocks(catalog: &ToolCatalog, config: &MockConfig) -> Self {
        let mut set = Self::new();
        for card in catalog.cards() {
            set.insert(Arc::new(MockAdapter::new(&card.name, config.clone())));
        }
        set
    }

    /// Replaces any adapter registered under the same name.
    pub fn insert(&mut self, adapter: Arc<dyn ToolAdapter>) {
        self.adapters.insert(adapter.tool_name().to_string(), adapter);
    }

    pub fn get(&self, tool: &str) -> Option<&Arc<dyn ToolAdapter>> {
        self.adapters.get(tool)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindError {
    #[error("step {target} has no successful output")]
    MissingUpstream { target: usize },
    #[error("image index {index} out of range, {available} image(s) attached")]
    ImageIndexOutOfRange { index: usize, available: usize },
    #[error(transparent)]
    NotInlineable(#[from] crate::artifact::NotInlineable),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("no adapter for tool {0:?}")]
    AdapterMissing(String),
}

fn image(images: &[String], index: usize) -> Result<&String, BindError> {
    images.get(index).ok_or(BindError::ImageIndexOutOfRange {
        index,
        available: images.len(),
    })
}

fn upstream(completed: &HashMap<usize, ArtifactValue>, target: usize) -> Result<&ArtifactValue, BindError> {
    completed.get(&target).ok_or(BindError::MissingUpstream { target })
}

/// Resolves one step's bindings. `completed` holds outputs of ok steps.
pub fn bind_arguments(
    bindings: &BTreeMap<String, Binding>,
    completed: &HashMap<usize, ArtifactValue>,
    images: &[String],
) -> Result<ToolArgs, BindError> {
    let mut args = ToolArgs::new();
    for (name, binding) in bindings {
        let value = match binding {
            Binding::Literal(text) => ArtifactValue::Text(text.clone()),
            Binding::UserImage(j) => ArtifactValue::ImageRef(image(images, *j)?.clone()),
            Binding::StepOutput(k) => upstream(completed, *k)?.clone(),
            Binding::Interpolated(parts) => {
                let mut text = String::new();
                for part in parts {
                    match part {
                        TemplatePart::Text(t) => text.push_str(t),
                        TemplatePart::Image(j) => text.push_str(image(images, *j)?),
                        TemplatePart::Step(k) => text.push_str(&upstream(completed, *k)?.inline_text()?),
                    }
                }
                ArtifactValue::Text(text)
            }
        };
        args.insert(name.clone(), value);
    }
    Ok(args)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Ok,
    Failed,
}

/// Wall-clock placement of a step relative to the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTiming {
    pub started_us: u64,
    pub finished_us: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step_id: usize,
    pub tool: String,
    pub status: StepStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<ArtifactValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Absent for steps that never ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<StepTiming>,
}

impl StepResult {
    pub fn is_ok(&self) -> bool {
        self.status == StepStatus::Ok
    }

    fn failed(step_id: usize, tool: &str, error: String, timing: Option<StepTiming>) -> Self {
        Self {
            step_id,
            tool: tool.to_string(),
            status: StepStatus::Failed,
            output: None,
            error: Some(error),
            timing,
        }
    }
}

pub const UPSTREAM_FAILURE: &str = "upstream";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Ok,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub graph: ValidatedGraph,
    /// One result per step, indexed by step id.
    pub results: Vec<StepResult>,
    pub overall: Overall,
}

impl ExecutionTrace {
    /// Ok results of sink steps, in step order.
    pub fn sink_outputs(&self) -> Vec<(&StepResult, &ArtifactValue)> {
        self.graph
            .sinks()
            .into_iter()
            .filter_map(|i| {
                let r = &self.results[i];
                r.output.as_ref().map(|o| (r, o))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub step_timeout: Duration,
    /// Upper bound on steps running at once.
    pub max_concurrency: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            step_timeout: Duration::from_secs(60),
            max_concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecEvent {
    StepStarted { step_id: usize, tool: String, args: ToolArgs },
    StepFinished(StepResult),
}

fn overall(graph: &ValidatedGraph, results: &[StepResult]) -> Overall {
    if results.iter().all(StepResult::is_ok) {
        Overall::Ok
    } else if graph.sinks().iter().all(|&i| !results[i].is_ok()) {
        Overall::Failed
    } else {
        Overall::Partial
    }
}

pub async fn execute_graph(
    graph: &ValidatedGraph,
    adapters: &AdapterSet,
    images: &[String],
    config: &ExecConfig,
    observer: &mut (dyn FnMut(ExecEvent) + Send),
) -> Result<ExecutionTrace, ExecError> {
    let steps = graph.steps();
    let resolved_adapters = steps
        .iter()
        .map(|s| adapters.get(&s.tool).cloned().ok_or_else(|| ExecError::AdapterMissing(s.tool.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let deps: Vec<Vec<usize>> = steps.iter().map(|s| s.dependencies().into_iter().collect()).collect();

    let run_start = Instant::now();
    let mut results: Vec<Option<StepResult>> = vec![None; steps.len()];
    let mut completed: HashMap<usize, ArtifactValue> = HashMap::new();

    loop {
        let frontier: Vec<usize> = (0..steps.len())
            .filter(|&i| results[i].is_none() && deps[i].iter().all(|&d| results[d].is_some()))
            .collect();
        if frontier.is_empty() {
            break;
        }

        let mut runnable = Vec::new();
        for &i in &frontier {
            let tool = &steps[i].tool;
            if deps[i].iter().any(|&d| !results[d].as_ref().is_some_and(StepResult::is_ok)) {
                let r = StepResult::failed(i, tool, UPSTREAM_FAILURE.to_string(), None);
                observer(ExecEvent::StepFinished(r.clone()));
                results[i] = Some(r);
                continue;
            }
            match bind_arguments(&graph.bindings[i], &completed, images) {
                Ok(args) => runnable.push((i, args)),
                Err(e) => {
                    let r = StepResult::failed(i, tool, e.to_string(), None);
                    observer(ExecEvent::StepFinished(r.clone()));
                    results[i] = Some(r);
                }
            }
        }
        if runnable.is_empty() {
            continue;
        }

        for (i, args) in &runnable {
            observer(ExecEvent::StepStarted {
                step_id: *i,
                tool: steps[*i].tool.clone(),
                args: args.clone(),
            });
        }
        let width = runnable.len().min(config.max_concurrency.max(1));
        let permits = Semaphore::new(width);
        let runs = runnable.iter().map(|(i, args)| {
            let adapter = &resolved_adapters[*i];
            let permits = &permits;
            async move {
                let _permit = permits.acquire().await.expect("semaphore is never closed");
                let started = Instant::now();
                let outcome = match tokio::time::timeout(config.step_timeout, adapter.invoke(args)).await {
                    Ok(r) => r,
                    Err(_) => Err(ToolError::ToolTimeout(config.step_timeout)),
                };
                let finished = Instant::now();
                let timing = StepTiming {
                    started_us: (started - run_start).as_micros() as u64,
                    finished_us: (finished - run_start).as_micros() as u64,
                    duration_ms: (finished - started).as_millis() as u64,
                };
                (*i, outcome, timing)
            }
        });
        for (i, outcome, timing) in join_all(runs).await {
            let tool = &steps[i].tool;
            let r = match outcome {
                Ok(output) => {
                    completed.insert(i, output.clone());
                    StepResult {
                        step_id: i,
                        tool: tool.clone(),
                        status: StepStatus::Ok,
                        output: Some(output),
                        error: None,
                        timing: Some(timing),
                    }
                }
                Err(e) => StepResult::failed(i, tool, e.to_string(), Some(timing)),
            };
            observer(ExecEvent::StepFinished(r.clone()));
            results[i] = Some(r);
        }
    }

    let results: Vec<StepResult> = results.into_iter().map(|r| r.expect("every step resolved")).collect();
    Ok(ExecutionTrace {
        overall: overall(graph, &results),
        graph: graph.clone(),
        results,
    })
}
