use serde::{Deserialize, Serialize};

use super::IntegrationError;
use crate::llm::{CompletionRequest, LlmBackend};

pub const CHOICE_QUESTION: &str = "Which option best answers the request?";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceOption {
    pub label: char,
    pub rendering: String,
    pub source_tool: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceSet {
    pub question: String,
    pub options: Vec<ChoiceOption>,
}

impl ChoiceSet {
    pub fn option(&self, label: char) -> Option<&ChoiceOption> {
        self.options.iter().find(|o| o.label == label)
    }

    fn last_label(&self) -> char {
        self.options.last().map_or('A', |o| o.label)
    }

    /// Prompt text. Tool identities appear only when `reveal_tools` is set.
    pub fn prompt(&self, reveal_tools: bool) -> String {
        let mut out = format!("{}\n{}", self.question, CHOICE_QUESTION);
        for o in &self.options {
            out.push_str(&format!("\n{}. {}", o.label, o.rendering));
            if reveal_tools {
                out.push_str(&format!(" (from {})", o.source_tool));
            }
        }
        out.push_str("\nAnswer with the option letter.");
        out
    }
}

/// Labels `(source_tool, rendering)` pairs A, B, ... in input order.
pub fn format_choices(query: &str, transformed: &[(String, String)]) -> Result<ChoiceSet, IntegrationError> {
    if transformed.len() < 2 {
        return Err(IntegrationError::TooFewOptions(transformed.len()));
    }
    if transformed.len() > 26 {
        return Err(IntegrationError::TooManyOptions(transformed.len()));
    }
    let options = transformed
        .iter()
        .enumerate()
        .map(|(i, (tool, rendering))| ChoiceOption {
            label: (b'A' + i as u8) as char,
            rendering: rendering.clone(),
            source_tool: tool.clone(),
        })
        .collect();
    Ok(ChoiceSet {
        question: query.to_string(),
        options,
    })
}

/// First standalone option letter in range. Uppercase letters are tried
/// before lowercase ones so that the article "a" in prose does not
/// outrank an explicit "B".
pub fn parse_selection(reply: &str, last_label: char) -> Option<char> {
    let standalone = |upper: bool| {
        let chars: Vec<char> = reply.chars().collect();
        chars.iter().enumerate().find_map(|(i, &c)| {
            let in_case = if upper { c.is_ascii_uppercase() } else { c.is_ascii_lowercase() };
            if !in_case {
                return None;
            }
            let before_ok = i == 0 || !chars[i - 1].is_alphanumeric();
            let after_ok = chars.get(i + 1).is_none_or(|n| !n.is_alphanumeric());
            let label = c.to_ascii_uppercase();
            (before_ok && after_ok && label <= last_label).then_some(label)
        })
    };
    standalone(true).or_else(|| standalone(false))
}

/// Outcome of a selection round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub label: char,
    pub source_tool: String,
    pub rendering: String,
    pub rationale: String,
    /// True when no label could be parsed and option A was used.
    pub fallback: bool,
}

pub async fn discriminate_select(
    backend: &dyn LlmBackend,
    choices: &ChoiceSet,
    reveal_tools: bool,
    request: &CompletionRequest,
) -> Result<Selection, IntegrationError> {
    if choices.options.len() < 2 {
        return Err(IntegrationError::TooFewOptions(choices.options.len()));
    }
    let reply = backend.complete(&request.with_prompt(choices.prompt(reveal_tools))).await?;
    let (label, fallback) = match parse_selection(&reply, choices.last_label()) {
        Some(l) => (l, false),
        None => ('A', true),
    };
    let option = choices.option(label).expect("parsed label is in range");
    Ok(Selection {
        label,
        source_tool: option.source_tool.clone(),
        rendering: option.rendering.clone(),
        rationale: reply,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedBackend;

    fn pairs(n: usize) -> Vec<(String, String)> {
        (0..n).map(|i| (format!("Tool {i}"), format!("result {i}"))).collect()
    }

    #[test]
    fn labels_in_input_order() {
        let set = format_choices("q", &pairs(4)).unwrap();
        let labels: String = set.options.iter().map(|o| o.label).collect();
        assert_eq!(labels, "ABCD");
        assert!(matches!(format_choices("q", &pairs(1)), Err(IntegrationError::TooFewOptions(1))));
    }

    #[test]
    fn prompt_hides_tools_by_default() {
        let set = format_choices("Who is taller?", &pairs(2)).unwrap();
        assert_eq!(
            set.prompt(false),
            "Who is taller?\nWhich option best answers the request?\nA. result 0\nB. result 1\nAnswer with the option letter."
        );
        assert!(set.prompt(true).contains("A. result 0 (from Tool 0)"));
    }

    #[test]
    fn selection_parse_rule() {
        assert_eq!(parse_selection("The answer is B because it fits", 'B'), Some('B'));
        assert_eq!(parse_selection("b)", 'B'), Some('B'));
        assert_eq!(parse_selection("I pick a option: C", 'C'), Some('C'));
        assert_eq!(parse_selection("Option D", 'C'), None);
        assert_eq!(parse_selection("none of them", 'C'), None);
        assert_eq!(parse_selection("AB", 'B'), None);
    }

    #[tokio::test]
    async fn fallback_is_recorded() {
        let set = format_choices("q", &pairs(2)).unwrap();
        let sel = discriminate_select(&ScriptedBackend::always("no idea"), &set, false, &CompletionRequest::default())
            .await
            .unwrap();
        assert_eq!((sel.label, sel.fallback), ('A', true));
        let sel = discriminate_select(&ScriptedBackend::always("B."), &set, false, &CompletionRequest::default())
            .await
            .unwrap();
        assert_eq!((sel.label, sel.source_tool.as_str(), sel.fallback), ('B', "Tool 1", false));
    }
}
