//! Tool-use metrics, benchmark runs, and the prompt pipeline used to build
//! benchmark data.

mod dataset;
mod generated;
mod metrics;
mod multiturn;
mod prompts;
mod runner;
mod scoring;
mod toolcard;

pub use dataset::{check_against_catalog, load_dataset, parse_dataset, BenchmarkRecord, Split, Turn};
pub use generated::{parse_generated_records, Draft, GeneratedRecords, Reject};
pub use metrics::{bleu, text_iou, tokenize, BLEU_DEFINITION, IOU_DEFINITION};
pub use multiturn::{merge_multiturn, MergeOutcome};
pub use prompts::{render_generation_prompt, GenerationPromptSpec, TemplateId, TEMPLATE_VERSION};
pub use runner::{
    recompute_report, run_benchmark, BenchConfig, BenchContext, BenchOutput, DumpEntry, DumpHeader, DUMP_VERSION,
};
pub use scoring::{aggregate, score, Gold, MetricReport, Metrics, PredictionRecord, Scores, DEFAULT_SUCCESS_THRESHOLD};
pub use toolcard::{parse_toolcard_reply, ToolcardDraft};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dataset line {line}: {message}")]
    DatasetParse { line: usize, message: String },
    #[error("record {record} uses tool {tool:?}, which is not in the catalog")]
    UnknownGoldTool { record: String, tool: String },
    #[error("no records to score")]
    EmptyRun,
    #[error("template slot {0:?} is not filled")]
    MissingSlot(String),
    #[error("cannot merge: {0}")]
    MergePrecondition(String),
}
