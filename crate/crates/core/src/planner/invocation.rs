use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::PlanError;
use crate::registry::is_identifier;

pub const THOUGHT_PREFIX: &str = "Thought: Do I need to use a tool?";

/// One parsed single-tool emission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInvocation {
    #[serde(rename = "thought")]
    pub use_tool: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_input: Option<ActionInput>,
    /// Text following a "No" thought, i.e. the direct answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
}

impl ToolInvocation {
    /// A tool call with a raw action input. Panics on an unparseable input,
    /// so only use it with literal fixtures.
    pub fn call(action: &str, input: &str) -> Self {
        Self {
            use_tool: true,
            action: Some(action.to_string()),
            action_input: Some(ActionInput::parse(input).expect("valid action input")),
            response: None,
        }
    }

    pub fn no_tool(response: Option<&str>) -> Self {
        Self {
            use_tool: false,
            action: None,
            action_input: None,
            response: response.map(str::to_string),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match (self.use_tool, &self.action) {
            (true, None) => Err("thought is yes but no action".into()),
            (false, Some(_)) => Err("thought is no but an action is present".into()),
            _ => Ok(()),
        }
    }

    /// Renders the emission in the Thought/Action/Action Input grammar.
    pub fn render(&self) -> String {
        if self.use_tool {
            let mut out = format!("{THOUGHT_PREFIX} Yes\nAction: {}", self.action.as_deref().unwrap_or(""));
            if let Some(input) = &self.action_input {
                out.push_str("\nAction Input: ");
                out.push_str(input.raw());
            }
            out
        } else {
            match &self.response {
                Some(r) => format!("{THOUGHT_PREFIX} No\nAI: {r}"),
                None => format!("{THOUGHT_PREFIX} No"),
            }
        }
    }
}

/// One `;`-separated segment of an action input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputArg {
    pub name: Option<String>,
    pub value: String,
}

/// Action input text, kept verbatim alongside its parsed segments.
///
/// Either every segment is `key=value` (named form) or none is treated as
/// such (positional form; a single-argument tool gets one segment).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionInput {
    raw: String,
    args: Vec<InputArg>,
}

impl ActionInput {
    pub fn parse(raw: &str) -> Result<Self, String> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Err("empty action input".into());
        }
        let segments: Vec<&str> = raw.split(';').map(str::trim).collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err("empty argument segment".into());
        }
        let named: Vec<Option<(&str, &str)>> = segments.iter().map(|s| split_named(s)).collect();
        let named_count = named.iter().filter(|n| n.is_some()).count();
        let args = if named_count == segments.len() {
            let mut seen = HashSet::new();
            let mut args = Vec::with_capacity(segments.len());
            for (key, value) in named.into_iter().flatten() {
                if !seen.insert(key) {
                    return Err(format!("duplicate argument {key:?}"));
                }
                args.push(InputArg {
                    name: Some(key.to_string()),
                    value: value.to_string(),
                });
            }
            args
        } else if named_count > 0 && segments.len() > 1 {
            return Err("mixed named and positional arguments".into());
        } else {
            segments
                .iter()
                .map(|s| InputArg {
                    name: None,
                    value: s.to_string(),
                })
                .collect()
        };
        Ok(Self {
            raw: raw.to_string(),
            args,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn args(&self) -> &[InputArg] {
        &self.args
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.args
            .iter()
            .find(|a| a.name.as_deref() == Some(name))
            .map(|a| a.value.as_str())
    }
}

fn split_named(segment: &str) -> Option<(&str, &str)> {
    let (key, value) = segment.split_once('=')?;
    let key = key.trim();
    is_identifier(key).then(|| (key, value.trim()))
}

impl fmt::Display for ActionInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl Serialize for ActionInput {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for ActionInput {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        ActionInput::parse(&raw).map_err(serde::de::Error::custom)
    }
}

/// Parses a Thought/Action/Action Input emission.
///
/// The first non-blank line must be the thought line. After a "Yes", the
/// next non-blank line must be `Action:` and the one after `Action Input:`.
/// Anything after that is ignored.
pub fn parse_invocation(text: &str) -> Result<ToolInvocation, PlanError> {
    let malformed = |reason: &str| PlanError::MalformedEmission {
        reason: reason.to_string(),
        raw: text.to_string(),
    };
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let thought = lines.next().ok_or_else(|| malformed("empty emission"))?;
    let rest = thought
        .strip_prefix("Thought:")
        .ok_or_else(|| malformed("missing Thought line"))?;
    let answer = match rest.rfind('?') {
        Some(pos) => &rest[pos + 1..],
        None => rest,
    }
    .trim()
    .to_ascii_lowercase();
    let use_tool = if answer.starts_with("yes") {
        true
    } else if answer.starts_with("no") {
        false
    } else {
        return Err(malformed("thought is neither Yes nor No"));
    };

    if !use_tool {
        let remainder: Vec<&str> = lines.collect();
        let response = remainder.join("\n");
        let response = response.strip_prefix("AI:").unwrap_or(&response).trim().to_string();
        return Ok(ToolInvocation::no_tool((!response.is_empty()).then_some(response.as_str())));
    }

    let action = lines
        .next()
        .and_then(|l| l.strip_prefix("Action:"))
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .ok_or_else(|| malformed("Yes without Action"))?;
    let input = lines
        .next()
        .and_then(|l| l.strip_prefix("Action Input:"))
        .ok_or_else(|| malformed("missing Action Input"))?;
    let action_input =
        ActionInput::parse(input).map_err(|e| malformed(&format!("unparseable Action Input: {e}")))?;
    Ok(ToolInvocation {
        use_tool: true,
        action: Some(action.to_string()),
        action_input: Some(action_input),
        response: None,
    })
}
