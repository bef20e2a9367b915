//! Core of the agentloom tool-orchestration framework.
//!
//! The agent loop is: retrieve a tool-usage example for the user query,
//! ask the language model for a tool invocation or tool graph, execute the
//! graph against tool adapters, turn raw tool artifacts into text the model
//! can read, optionally let the model discriminate between competing
//! results, and finally synthesize an answer.
//!
//! The [`evalharness`] module scores planner emissions against gold
//! invocations with the usual tool-use metrics (thought / action / argument
//! success rates, overall success and token IoU).

pub mod artifact;
pub mod evalharness;
pub mod events;
pub mod executor;
pub mod integration;
pub mod llm;
pub mod pipeline;
pub mod planner;
pub mod registry;
pub mod retrieval;

pub use artifact::{ArtifactStore, ArtifactValue};
pub use planner::{ToolGraph, ToolInvocation};
pub use registry::{ToolCard, ToolCatalog, ToolDocument};

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes.as_ref()))
}
