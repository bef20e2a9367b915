//! Benchmark datasets: JSONL, one record per line.
//!
//! ```json
//! {"id": "r1", "instruction": "...", "caption": "...", "images": ["example.jpg"],
//!  "split": "seen", "gold": {"kind": "node", "invocation": {...}}}
//! ```
//!
//! Multi-turn records replace `gold` with `"turns": [{"instruction", "gold"}, ...]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scoring::Gold;
use super::EvalError;
use crate::registry::ToolCatalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Seen,
    Unseen,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Seen => "seen",
            Split::Unseen => "unseen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub instruction: String,
    pub gold: Gold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub id: String,
    pub instruction: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub images: Vec<String>,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Gold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turns: Option<Vec<Turn>>,
}

impl BenchmarkRecord {
    /// `(instruction, gold)` per turn; single-turn records have one.
    pub fn turn_list(&self) -> Vec<(&str, &Gold)> {
        match (&self.turns, &self.gold) {
            (Some(turns), _) => turns.iter().map(|t| (t.instruction.as_str(), &t.gold)).collect(),
            (None, Some(gold)) => vec![(self.instruction.as_str(), gold)],
            (None, None) => Vec::new(),
        }
    }

    fn check_shape(&self) -> Result<(), String> {
        match (&self.gold, &self.turns) {
            (Some(_), Some(_)) => Err("record has both gold and turns".into()),
            (None, None) => Err("record has neither gold nor turns".into()),
            (None, Some(t)) if t.len() < 2 => Err("multi-turn record needs at least 2 turns".into()),
            _ => Ok(()),
        }
    }
}

pub fn parse_dataset(text: &str) -> Result<Vec<BenchmarkRecord>, EvalError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| EvalError::DatasetParse { line: i + 1, message };
        let record: BenchmarkRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        record.check_shape().map_err(bad)?;
        for (_, gold) in record.turn_list() {
            gold.emission().map_err(|e| bad(e.to_string()))?;
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<BenchmarkRecord>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::DatasetParse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_dataset(&text)
}

/// Every gold tool must exist in the catalog.
pub fn check_against_catalog(records: &[BenchmarkRecord], catalog: &ToolCatalog) -> Result<(), EvalError> {
    for record in records {
        for (_, gold) in record.turn_list() {
            let tools = gold.tools().map_err(|e| EvalError::DatasetParse {
                line: 0,
                message: format!("{}: {e}", record.id),
            })?;
            if let Some(tool) = tools.into_iter().find(|t| catalog.card(t).is_none()) {
                return Err(EvalError::UnknownGoldTool {
                    record: record.id.clone(),
                    tool,
                });
            }
        }
    }
    Ok(())
}
