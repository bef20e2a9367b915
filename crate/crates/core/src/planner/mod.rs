//! Planning: prompt composition, the language-model call, and parsing of
//! the model's emission into a single invocation or a tool graph.

mod graph;
mod invocation;

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use graph::{
    classify_shape, parse_tool_graph, validate_graph, Binding, GraphShape, GraphStep, StepArg, TemplatePart,
    ToolGraph, ValidatedGraph,
};
pub use invocation::{parse_invocation, ActionInput, InputArg, ToolInvocation, THOUGHT_PREFIX};

use crate::llm::{complete_with_timeout, BackendError, CompletionRequest, LlmBackend};
use crate::retrieval::IndexedExample;

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("malformed emission: {reason}")]
    MalformedEmission { reason: String, raw: String },
    #[error("malformed tool graph: {reason}")]
    MalformedGraph { reason: String, raw: String },
    #[error("step {step} references step {target}, which does not precede it")]
    ForwardReference { step: usize, target: usize },
    #[error("bad placeholder {0}")]
    BadPlaceholder(String),
    #[error("unknown tool {0:?}")]
    UnknownToolName(String),
    #[error("step {step} ({tool}) is missing required argument {arg:?}")]
    MissingRequiredArg { step: usize, tool: String, arg: String },
    #[error("step {step} ({tool}) has unexpected argument {arg:?}")]
    UnexpectedArg { step: usize, tool: String, arg: String },
    #[error("tool graph contains a cycle")]
    CycleDetected,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// What the planner emitted: a single invocation or a step-list graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Emission {
    Invocation { invocation: ToolInvocation },
    Graph { plan: String, graph: ToolGraph },
}

impl Emission {
    pub fn render(&self) -> String {
        match self {
            Emission::Invocation { invocation } => invocation.render(),
            Emission::Graph { graph, .. } => graph.render(),
        }
    }

    pub fn uses_tool(&self) -> bool {
        match self {
            Emission::Invocation { invocation } => invocation.use_tool,
            Emission::Graph { .. } => true,
        }
    }

    /// The graph to execute, if any.
    pub fn to_graph(&self) -> Result<Option<ToolGraph>, PlanError> {
        match self {
            Emission::Invocation { invocation } => ToolGraph::from_invocation(invocation),
            Emission::Graph { graph, .. } => Ok(Some(graph.clone())),
        }
    }
}

impl From<ToolGraph> for Emission {
    fn from(graph: ToolGraph) -> Self {
        Emission::Graph {
            plan: graph.render(),
            graph,
        }
    }
}

impl From<ToolInvocation> for Emission {
    fn from(invocation: ToolInvocation) -> Self {
        Emission::Invocation { invocation }
    }
}

/// Parses either grammar; a leading `[` selects the step-list form.
pub fn parse_emission(text: &str) -> Result<Emission, PlanError> {
    if text.trim_start().starts_with('[') {
        Ok(parse_tool_graph(text)?.into())
    } else {
        Ok(parse_invocation(text)?.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    pub role: Role,
    pub text: String,
    /// The raw plan emitted for an assistant turn, if a tool was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_plan: Option<String>,
}

impl HistoryTurn {
    pub fn user(text: &str) -> Self {
        Self {
            role: Role::User,
            text: text.to_string(),
            tool_plan: None,
        }
    }

    pub fn assistant(text: &str, tool_plan: Option<&str>) -> Self {
        Self {
            role: Role::Assistant,
            text: text.to_string(),
            tool_plan: tool_plan.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PromptContext {
    pub query: String,
    pub image_refs: Vec<String>,
    /// Textual stand-in for the image content, used by benchmarks.
    pub image_caption: Option<String>,
    pub history: Vec<HistoryTurn>,
    pub retrieved: Option<IndexedExample>,
    pub tool_block: String,
}

/// Fixed planner instructions. Bump the version when the wording changes.
pub const PLAN_PREAMBLE_VERSION: &str = "plan-preamble/v1";
pub const PLAN_PREAMBLE: &str = "\
You are an assistant for 3D human understanding and generation with access to the tools listed below.
Decide whether a tool is needed to answer the query.
For a single tool call, answer exactly in the form:
Thought: Do I need to use a tool? Yes
Action: <tool name>
Action Input: <arguments separated by ';'>
If no tool is needed, answer:
Thought: Do I need to use a tool? No
AI: <your answer>
If several tools are needed, answer with a step list instead:
[[tool name, arguments], [tool name, arguments], ...]
where {{image_j}} refers to the j-th user image and {{step_k.output}} to the output of step k.
Use tool names exactly as listed.";

/// Lays out the planning prompt: preamble, tools, the retrieved example
/// (when present), user images, conversation history, then the query.
pub fn compose_plan_prompt(ctx: &PromptContext) -> String {
    let mut out = String::new();
    out.push_str(PLAN_PREAMBLE);
    out.push_str("\n\nTools:\n");
    out.push_str(&ctx.tool_block);
    if let Some(example) = &ctx.retrieved {
        let _ = write!(
            out,
            "\n\nExample:\nQuery: {}\n{}",
            example.query,
            example.gold_invocation.render()
        );
    }
    if !ctx.image_refs.is_empty() {
        out.push_str("\n\nImages:");
        for (j, image) in ctx.image_refs.iter().enumerate() {
            let _ = write!(out, "\n{{{{image_{j}}}}} = {image}");
        }
    }
    if let Some(caption) = &ctx.image_caption {
        let _ = write!(out, "\n\nImage description: {caption}");
    }
    if !ctx.history.is_empty() {
        out.push_str("\n\nConversation:");
        for turn in &ctx.history {
            match turn.role {
                Role::User => {
                    let _ = write!(out, "\nUser: {}", turn.text);
                }
                Role::Assistant => {
                    if let Some(plan) = &turn.tool_plan {
                        let _ = write!(out, "\nTool plan: {}", plan.replace('\n', " | "));
                    }
                    let _ = write!(out, "\nAssistant: {}", turn.text);
                }
            }
        }
    }
    let _ = write!(out, "\n\nQuery: {}\n", ctx.query);
    out
}

/// Sends the composed prompt to the backend and returns the completion verbatim.
pub async fn plan(
    backend: &dyn LlmBackend,
    ctx: &PromptContext,
    request: CompletionRequest,
    timeout: Duration,
) -> Result<String, BackendError> {
    let request = CompletionRequest {
        prompt: compose_plan_prompt(ctx),
        ..request
    };
    complete_with_timeout(backend, &request, timeout).await
}
