//! Turning a reply to the paper-to-toolcard prompt into a tool document
//! draft.
//!
//! The reply holds a definition sentence ("X is a tool to ...") followed
//! by a numbered list of user queries. Each query becomes a QA pair whose
//! invocation follows the catalog convention: file arguments point at
//! `example.jpg` (or `example.mp4` for videos), text arguments repeat the
//! query without its final punctuation. Numeric arguments are left out for
//! a human to fill in.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::planner::{ActionInput, ToolInvocation};
use crate::registry::{ArgKind, ArgSpec, QaPair, ToolDocument};

static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+[.)]\s+(.+)$").expect("static regex"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolcardDraft {
    /// The definition sentence, if the reply had one.
    pub description: Option<String>,
    pub document: ToolDocument,
    /// Numbered lines that could not be turned into a QA pair.
    pub rejects: Vec<String>,
}

fn definition(line: &str) -> Option<String> {
    if !line.contains(" is a tool to ") {
        return None;
    }
    let mut text = line.trim();
    if let Some((_, rest)) = text.split_once("description=") {
        text = rest;
    }
    let text = text.trim().trim_end_matches(',').trim_matches(|c| c == '"' || c == '\'');
    Some(text.trim().to_string())
}

fn arg_value(spec: &ArgSpec, query: &str) -> Option<String> {
    match spec.kind {
        ArgKind::FileRef if spec.name == "video" => Some("example.mp4".into()),
        ArgKind::FileRef => Some("example.jpg".into()),
        ArgKind::Text | ArgKind::PersonDescription => {
            Some(query.trim_end_matches(['.', '?', '!']).replace(';', ",").trim().to_string())
        }
        ArgKind::Numeric => None,
    }
}

pub fn parse_toolcard_reply(reply: &str, tool: &str, args: &[ArgSpec]) -> ToolcardDraft {
    let mut description = None;
    let mut seen = BTreeSet::new();
    let mut qa_pairs = Vec::new();
    let mut rejects = Vec::new();
    for line in reply.lines() {
        if let Some(caps) = NUMBERED.captures(line) {
            let query = caps[1].trim().trim_matches('"').trim().to_string();
            let input: Vec<String> = args.iter().filter_map(|a| arg_value(a, &query)).collect();
            match ActionInput::parse(&input.join("; ")) {
                Ok(parsed) if !query.is_empty() => {
                    if seen.insert(query.clone()) {
                        qa_pairs.push(QaPair {
                            query,
                            invocation: ToolInvocation {
                                use_tool: true,
                                action: Some(tool.to_string()),
                                action_input: Some(parsed),
                                response: None,
                            },
                        });
                    }
                }
                _ => rejects.push(line.trim().to_string()),
            }
        } else if description.is_none() {
            description = definition(line);
        }
    }
    ToolcardDraft {
        description,
        document: ToolDocument {
            tool_name: tool.to_string(),
            qa_pairs,
        },
        rejects,
    }
}
