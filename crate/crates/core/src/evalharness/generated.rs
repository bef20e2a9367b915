//! Parsing model-generated instruction lists of the form
//! `instruction content, [tool name, tool arguments]` or
//! `instruction content, [[tool1, args1], [tool2, args2]]`.
//!
//! Lines may carry a leading `N.` list number. When a single-call line
//! separates a file argument from a text argument with a comma
//! (`[Tool, example.jpg, make it snowy]`), the comma becomes the `;`
//! argument separator.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::scoring::Gold;
use crate::planner::{parse_tool_graph, ActionInput, ToolInvocation};

static LIST_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+[.)]\s*").expect("static regex"));
static FILE_HEAD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\S+\.[A-Za-z0-9]{2,4}|\{\{[a-z_0-9.]+\}\})\s*,\s*").expect("static regex"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    /// 1-based line number in the input.
    pub line: usize,
    pub instruction: String,
    pub gold: Gold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedRecords {
    pub drafts: Vec<Draft>,
    pub rejects: Vec<Reject>,
}

/// Start index of the bracket group that closes at the end of `text`.
fn trailing_group_start(text: &str) -> Option<usize> {
    if !text.ends_with(']') {
        return None;
    }
    let mut depth = 0usize;
    for (i, c) in text.char_indices().rev() {
        match c {
            ']' => depth += 1,
            '[' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn parse_line(line: &str) -> Result<(String, Gold), String> {
    let body = LIST_NUMBER.replace(line, "");
    let body = body.trim().trim_end_matches('.').trim_end();
    let start = trailing_group_start(body).ok_or("no trailing bracket group")?;
    let instruction = body[..start].trim().trim_end_matches(',').trim().to_string();
    if instruction.is_empty() {
        return Err("empty instruction".into());
    }
    let group = &body[start..];
    let gold = if group.starts_with("[[") {
        let graph = parse_tool_graph(group).map_err(|e| e.to_string())?;
        Gold::Graph { plan: graph.render() }
    } else {
        let inner = &group[1..group.len() - 1];
        let (tool, args) = match inner.split_once(',') {
            Some((t, a)) => (t.trim(), a.trim()),
            None => (inner.trim(), ""),
        };
        if tool.is_empty() {
            return Err("empty tool name".into());
        }
        let action_input = if args.is_empty() {
            None
        } else {
            let args = if args.contains(';') {
                args.to_string()
            } else {
                FILE_HEAD
                    .captures(args)
                    .map(|c| format!("{}; {}", &c[1], &args[c[0].len()..]))
                    .unwrap_or_else(|| args.to_string())
            };
            Some(ActionInput::parse(&args)?)
        };
        Gold::Node {
            invocation: ToolInvocation {
                use_tool: true,
                action: Some(tool.to_string()),
                action_input,
                response: None,
            },
        }
    };
    Ok((instruction, gold))
}

/// Total: every non-blank line becomes exactly one draft or one reject.
pub fn parse_generated_records(text: &str) -> GeneratedRecords {
    let mut out = GeneratedRecords::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok((instruction, gold)) => out.drafts.push(Draft {
                line: i + 1,
                instruction,
                gold,
            }),
            Err(reason) => out.rejects.push(Reject {
                line: i + 1,
                text: line.to_string(),
                reason,
            }),
        }
    }
    out
}
