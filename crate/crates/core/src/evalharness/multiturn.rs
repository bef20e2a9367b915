use serde::{Deserialize, Serialize};

use super::dataset::{BenchmarkRecord, Split, Turn};
use super::prompts::{render_generation_prompt, GenerationPromptSpec, TemplateId};
use super::EvalError;
use crate::llm::{CompletionRequest, LlmBackend};

const CONNECTIVES: [&str; 4] = ["Next, ", "After that, ", "Then, ", "Also, "];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub record: BenchmarkRecord,
    /// True when a backend was given but its rewrite could not be used.
    pub fell_back: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

fn lower_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn offline_instructions(records: &[BenchmarkRecord]) -> Vec<String> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if i == 0 {
                r.instruction.clone()
            } else {
                format!("{}{}", CONNECTIVES[(i - 1) % CONNECTIVES.len()], lower_first(&r.instruction))
            }
        })
        .collect()
}

/// Numbered lines `1. ...` in order; `None` unless exactly `expected` lines
/// numbered 1..=expected are present.
fn parse_numbered(reply: &str, expected: usize) -> Option<Vec<String>> {
    let mut out = Vec::new();
    for line in reply.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (number, rest) = line.split_once('.')?;
        if number.trim().parse::<usize>().ok()? != out.len() + 1 {
            return None;
        }
        let text = rest.trim();
        if text.is_empty() {
            return None;
        }
        out.push(text.to_string());
    }
    (out.len() == expected).then_some(out)
}

/// Merges single-turn records over the same image into one multi-turn
/// record. Golds are carried over unchanged. Without a backend the later
/// instructions are joined with fixed connectives; a backend failure or an
/// unusable rewrite falls back to the same offline merge.
pub async fn merge_multiturn(
    id: &str,
    records: &[BenchmarkRecord],
    backend: Option<&dyn LlmBackend>,
) -> Result<MergeOutcome, EvalError> {
    if records.len() < 2 {
        return Err(EvalError::MergePrecondition(format!("need at least 2 records, got {}", records.len())));
    }
    let first = &records[0];
    for r in records {
        if r.gold.is_none() || r.turns.is_some() {
            return Err(EvalError::MergePrecondition(format!("{} is not a single-turn record", r.id)));
        }
        if r.images != first.images || r.caption != first.caption {
            return Err(EvalError::MergePrecondition(format!("{} has a different image context", r.id)));
        }
    }

    let mut fallback_reason = None;
    let instructions = match backend {
        None => offline_instructions(records),
        Some(backend) => {
            let dialogue = records
                .iter()
                .enumerate()
                .map(|(i, r)| format!("{}. {}", i + 1, r.instruction))
                .collect::<Vec<_>>()
                .join("\n");
            let prompt =
                render_generation_prompt(&GenerationPromptSpec::new(TemplateId::MultiturnMerge).slot("dialogue", &dialogue))?;
            let request = CompletionRequest {
                prompt,
                record_id: Some(id.to_string()),
                turn_index: None,
            };
            match backend.complete(&request).await {
                Ok(reply) => parse_numbered(&reply, records.len()).unwrap_or_else(|| {
                    fallback_reason = Some("rewrite did not contain one numbered line per request".to_string());
                    offline_instructions(records)
                }),
                Err(e) => {
                    fallback_reason = Some(e.to_string());
                    offline_instructions(records)
                }
            }
        }
    };

    let turns: Vec<Turn> = records
        .iter()
        .zip(&instructions)
        .map(|(r, instruction)| Turn {
            instruction: instruction.clone(),
            gold: r.gold.clone().expect("checked above"),
        })
        .collect();
    let split = if records.iter().any(|r| r.split == Split::Unseen) {
        Split::Unseen
    } else {
        Split::Seen
    };
    Ok(MergeOutcome {
        record: BenchmarkRecord {
            id: id.to_string(),
            instruction: instructions[0].clone(),
            caption: first.caption.clone(),
            images: first.images.clone(),
            split,
            gold: None,
            turns: Some(turns),
        },
        fell_back: fallback_reason.is_some(),
        fallback_reason,
    })
}
