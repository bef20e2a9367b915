//! Benchmark runs: retrieve, prompt, plan, parse and score every turn.
//!
//! Multi-turn records are teacher-forced: turn t sees the earlier turns'
//! gold plans in its conversation history, not the planner's own outputs.
//!
//! The dump is JSONL. Its first line is a header carrying the scoring
//! configuration; every further line is one scored turn with enough
//! information to rescore offline.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::dataset::BenchmarkRecord;
use super::metrics::{BLEU_DEFINITION, IOU_DEFINITION};
use super::scoring::{aggregate, score, Gold, MetricReport, PredictionRecord, Scores, DEFAULT_SUCCESS_THRESHOLD};
use super::EvalError;
use crate::llm::{CompletionRequest, LlmBackend};
use crate::planner::{plan, HistoryTurn, PromptContext, ToolInvocation, PLAN_PREAMBLE_VERSION};
use crate::registry::ToolCatalog;
use crate::retrieval::{Embedder, RetrievalIndex};

pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub success_threshold: f64,
    pub plan_timeout: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            plan_timeout: Duration::from_secs(60),
        }
    }
}

/// Retrieval is skipped when `index` is `None`.
pub struct BenchContext<'a> {
    pub catalog: &'a ToolCatalog,
    pub backend: &'a dyn LlmBackend,
    pub index: Option<(&'a RetrievalIndex, &'a dyn Embedder)>,
    pub config: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub dump_version: u32,
    pub success_threshold: f64,
    pub bleu: String,
    pub iou: String,
    pub plan_preamble: String,
    pub retrieval: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub record_id: String,
    pub turn: usize,
    pub split: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieved: Option<String>,
    pub prompt_sha256: String,
    pub prediction: PredictionRecord,
    pub gold: Gold,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub report: MetricReport,
    pub header: DumpHeader,
    pub entries: Vec<DumpEntry>,
}

impl BenchOutput {
    pub fn dump_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    /// Writes the report as pretty JSON and the dump next to it.
    pub fn write(&self, report_path: &Path, dump_path: &Path) -> std::io::Result<()> {
        let report = serde_json::to_string_pretty(&self.report).expect("report serializes");
        std::fs::write(report_path, report + "\n")?;
        std::fs::write(dump_path, self.dump_jsonl())
    }
}

fn history_for(turns: &[(&str, &Gold)]) -> Result<Vec<HistoryTurn>, EvalError> {
    let mut history = Vec::new();
    for (instruction, gold) in turns {
        history.push(HistoryTurn::user(instruction));
        let reply = match gold {
            Gold::Node {
                invocation: ToolInvocation { response: Some(r), .. },
            } => r.clone(),
            _ => "Done.".to_string(),
        };
        let rendered = gold.render().map_err(|e| EvalError::DatasetParse {
            line: 0,
            message: e.to_string(),
        })?;
        history.push(HistoryTurn::assistant(&reply, Some(&rendered)));
    }
    Ok(history)
}

/// Runs every turn of every record in order. Backend failures are scored
/// as failed predictions and the run continues.
pub async fn run_benchmark(ctx: &BenchContext<'_>, records: &[BenchmarkRecord]) -> Result<BenchOutput, EvalError> {
    let tool_block = ctx.catalog.render_tool_definitions(None).expect("full catalog renders");
    let mut entries = Vec::new();
    for record in records {
        let turns = record.turn_list();
        for (t, (instruction, gold)) in turns.iter().enumerate() {
            let retrieved = match ctx.index {
                Some((index, embedder)) => index
                    .retrieve(embedder, instruction, 1)
                    .await
                    .ok()
                    .and_then(|hits| hits.first().map(|(e, _)| (*e).clone())),
                None => None,
            };
            let prompt_ctx = PromptContext {
                query: instruction.to_string(),
                image_refs: record.images.clone(),
                image_caption: (!record.caption.is_empty()).then(|| record.caption.clone()),
                history: history_for(&turns[..t])?,
                retrieved: retrieved.clone(),
                tool_block: tool_block.clone(),
            };
            let prompt = crate::planner::compose_plan_prompt(&prompt_ctx);
            let request = CompletionRequest {
                prompt: String::new(),
                record_id: Some(record.id.clone()),
                turn_index: Some(t),
            };
            let prediction = match plan(ctx.backend, &prompt_ctx, request, ctx.config.plan_timeout).await {
                Ok(raw) => PredictionRecord::from_raw(&record.id, &raw),
                Err(e) => PredictionRecord::failed(&record.id, &format!("backend: {e}")),
            };
            let scores = score(&prediction, gold, Some(ctx.catalog), ctx.config.success_threshold)
                .map_err(|e| EvalError::DatasetParse {
                    line: 0,
                    message: format!("{}: {e}", record.id),
                })?;
            entries.push(DumpEntry {
                record_id: record.id.clone(),
                turn: t,
                split: record.split.as_str().to_string(),
                retrieved: retrieved.map(|e| e.id),
                prompt_sha256: crate::sha256_hex(&prompt),
                prediction,
                gold: (*gold).clone(),
                scores,
            });
        }
    }
    let rows: Vec<(String, Scores)> = entries.iter().map(|e| (e.split.clone(), e.scores)).collect();
    Ok(BenchOutput {
        report: aggregate(&rows, ctx.config.success_threshold)?,
        header: DumpHeader {
            dump_version: DUMP_VERSION,
            success_threshold: ctx.config.success_threshold,
            bleu: BLEU_DEFINITION.to_string(),
            iou: IOU_DEFINITION.to_string(),
            plan_preamble: PLAN_PREAMBLE_VERSION.to_string(),
            retrieval: ctx.index.is_some(),
        },
        entries,
    })
}

/// Rescores a dump from its raw predictions and golds.
pub fn recompute_report(dump: &str, catalog: &ToolCatalog) -> Result<MetricReport, EvalError> {
    let mut lines = dump.lines().filter(|l| !l.trim().is_empty()).enumerate();
    let bad = |line: usize, message: String| EvalError::DatasetParse { line: line + 1, message };
    let (_, first) = lines.next().ok_or(EvalError::EmptyRun)?;
    let header: DumpHeader = serde_json::from_str(first).map_err(|e| bad(0, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, line) in lines {
        let entry: DumpEntry = serde_json::from_str(line).map_err(|e| bad(i, e.to_string()))?;
        let pred = match &entry.prediction.parse_error {
            Some(cause) if entry.prediction.raw.is_empty() => PredictionRecord::failed(&entry.record_id, cause),
            _ => PredictionRecord::from_raw(&entry.record_id, &entry.prediction.raw),
        };
        let s = score(&pred, &entry.gold, Some(catalog), header.success_threshold).map_err(|e| bad(i, e.to_string()))?;
        rows.push((entry.split, s));
    }
    aggregate(&rows, header.success_threshold)
}
