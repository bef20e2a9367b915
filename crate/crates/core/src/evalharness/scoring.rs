use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::metrics::{bleu, text_iou, BLEU_DEFINITION, IOU_DEFINITION};
use super::EvalError;
use crate::planner::{parse_emission, parse_tool_graph, Emission, PlanError, ToolInvocation};
use crate::registry::{ArgKind, ToolCatalog};

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.5;

/// Reference answer for one benchmark turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gold {
    Node { invocation: ToolInvocation },
    Graph { plan: String },
}

impl Gold {
    pub fn emission(&self) -> Result<Emission, PlanError> {
        match self {
            Gold::Node { invocation } => Ok(invocation.clone().into()),
            Gold::Graph { plan } => Ok(parse_tool_graph(plan)?.into()),
        }
    }

    /// The gold in planner grammar, which a perfect planner would emit.
    pub fn render(&self) -> Result<String, PlanError> {
        Ok(self.emission()?.render())
    }

    pub fn tools(&self) -> Result<Vec<String>, PlanError> {
        Ok(flatten(&self.emission()?).into_iter().map(|s| s.tool).collect())
    }
}

/// One planner output as scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub raw: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parsed: Option<Emission>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

impl PredictionRecord {
    pub fn from_raw(id: &str, raw: &str) -> Self {
        let (parsed, parse_error) = match parse_emission(raw) {
            Ok(e) => (Some(e), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            id: id.to_string(),
            raw: raw.to_string(),
            parsed,
            parse_error,
        }
    }

    /// A record whose backend call failed; scored like a parse failure.
    pub fn failed(id: &str, cause: &str) -> Self {
        Self {
            id: id.to_string(),
            raw: String::new(),
            parsed: None,
            parse_error: Some(cause.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub thought: f64,
    pub action: f64,
    pub args: f64,
    pub success: f64,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct FlatArg {
    name: Option<String>,
    value: String,
}

#[derive(Debug, Clone, PartialEq)]
struct FlatStep {
    tool: String,
    args: Vec<FlatArg>,
}

/// Both grammars reduce to an ordered list of tool calls; a no-tool answer
/// is the empty list.
fn flatten(emission: &Emission) -> Vec<FlatStep> {
    match emission {
        Emission::Invocation { invocation } if invocation.use_tool => vec![FlatStep {
            tool: invocation.action.clone().unwrap_or_default(),
            args: invocation
                .action_input
                .iter()
                .flat_map(|input| input.args())
                .map(|a| FlatArg {
                    name: a.name.clone(),
                    value: a.value.clone(),
                })
                .collect(),
        }],
        Emission::Invocation { .. } => Vec::new(),
        Emission::Graph { graph, .. } => graph
            .steps
            .iter()
            .map(|s| FlatStep {
                tool: s.tool.clone(),
                args: s
                    .args
                    .iter()
                    .map(|a| FlatArg {
                        name: a.name.clone(),
                        value: a.binding.render(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

static FILE_NAME: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\S+\.(jpe?g|png|gif|bmp|webp|tiff?|mp4|avi|mov|gif|npz|npy|obj|ply|glb|fbx|bvh)$")
        .expect("static regex")
});

/// Whether gold argument `index` of a step is compared exactly: file
/// arguments per the catalog, any placeholder reference, or a value that
/// looks like a file name.
fn is_file_arg(catalog: Option<&ToolCatalog>, tool: &str, index: usize, arg: &FlatArg) -> bool {
    if arg.value.contains("{{") || FILE_NAME.is_match(arg.value.trim()) {
        return true;
    }
    let Some(card) = catalog.and_then(|c| c.card(tool)) else {
        return false;
    };
    let spec = match &arg.name {
        Some(name) => card.arg(name),
        None => card.args.get(index),
    };
    spec.is_some_and(|s| s.kind == ArgKind::FileRef)
}

fn matching_arg<'a>(pred: &'a FlatStep, gold: &FlatArg, index: usize) -> Option<&'a FlatArg> {
    if let Some(name) = &gold.name {
        if let Some(hit) = pred.args.iter().find(|a| a.name.as_deref() == Some(name)) {
            return Some(hit);
        }
        if pred.args.iter().any(|a| a.name.is_some()) {
            return None;
        }
    }
    pred.args.get(index)
}

/// Scores one prediction against its gold. Total: malformed predictions
/// score 0 on every component except IoU.
pub fn score(
    pred: &PredictionRecord,
    gold: &Gold,
    catalog: Option<&ToolCatalog>,
    success_threshold: f64,
) -> Result<Scores, PlanError> {
    let gold_emission = gold.emission()?;
    let iou = text_iou(&pred.raw, &gold_emission.render());
    let Some(parsed) = &pred.parsed else {
        return Ok(Scores {
            thought: 0.0,
            action: 0.0,
            args: 0.0,
            success: 0.0,
            iou,
        });
    };

    let thought = parsed.uses_tool() == gold_emission.uses_tool();
    let gold_steps = flatten(&gold_emission);
    let pred_steps = flatten(parsed);

    if gold_steps.is_empty() {
        let hit = f64::from(u8::from(pred_steps.is_empty()));
        return Ok(Scores {
            thought: f64::from(u8::from(thought)),
            action: hit,
            args: hit,
            success: hit,
            iou,
        });
    }

    let action = gold_steps.len() == pred_steps.len() && gold_steps.iter().zip(&pred_steps).all(|(g, p)| g.tool == p.tool);

    let mut etas = Vec::new();
    let mut all_pass = true;
    for (i, g) in gold_steps.iter().enumerate() {
        let p = pred_steps.get(i);
        for (j, garg) in g.args.iter().enumerate() {
            let candidate = p.and_then(|p| matching_arg(p, garg, j)).map(|a| a.value.trim());
            let eta = if is_file_arg(catalog, &g.tool, j, garg) {
                f64::from(u8::from(candidate == Some(garg.value.trim())))
            } else {
                candidate.map_or(0.0, |c| bleu(c, &garg.value))
            };
            let passes = if is_file_arg(catalog, &g.tool, j, garg) {
                eta == 1.0
            } else {
                eta >= success_threshold
            };
            all_pass &= passes;
            etas.push(eta);
        }
    }
    let args = if etas.is_empty() {
        f64::from(u8::from(action))
    } else {
        etas.iter().sum::<f64>() / etas.len() as f64
    };
    let success = thought && action && all_pass;
    Ok(Scores {
        thought: f64::from(u8::from(thought)),
        action: f64::from(u8::from(action)),
        args,
        success: f64::from(u8::from(success)),
        iou,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub sr_t: f64,
    pub sr_act: f64,
    pub sr_args: f64,
    pub sr: f64,
    pub iou: f64,
}

impl Metrics {
    fn mean(scores: &[Scores]) -> Self {
        let n = scores.len();
        let avg = |f: fn(&Scores) -> f64| scores.iter().map(f).sum::<f64>() / n as f64;
        Self {
            n,
            sr_t: avg(|s| s.thought),
            sr_act: avg(|s| s.action),
            sr_args: avg(|s| s.args),
            sr: avg(|s| s.success),
            iou: avg(|s| s.iou),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(flatten)]
    pub overall: Metrics,
    /// Per split name ("seen", "unseen").
    pub splits: BTreeMap<String, Metrics>,
    pub success_threshold: f64,
    pub bleu: String,
    pub iou_definition: String,
}

/// Means over `(split, scores)` pairs, overall and per split.
pub fn aggregate(scored: &[(String, Scores)], success_threshold: f64) -> Result<MetricReport, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::EmptyRun);
    }
    let all: Vec<Scores> = scored.iter().map(|(_, s)| *s).collect();
    let mut by_split: BTreeMap<String, Vec<Scores>> = BTreeMap::new();
    for (split, s) in scored {
        by_split.entry(split.clone()).or_default().push(*s);
    }
    Ok(MetricReport {
        overall: Metrics::mean(&all),
        splits: by_split.into_iter().map(|(k, v)| (k, Metrics::mean(&v))).collect(),
        success_threshold,
        bleu: BLEU_DEFINITION.to_string(),
        iou_definition: IOU_DEFINITION.to_string(),
    })
}

impl MetricReport {
    /// Plain-text table with one row per split and an "all" row.
    pub fn table(&self) -> String {
        let mut out = String::from("split       n   SR_t   SR_act SR_args SR     IoU\n");
        let mut row = |name: &str, m: &Metrics| {
            let _ = writeln!(
                out,
                "{name:<8} {:>4}   {:.3}  {:.3}  {:.3}   {:.3}  {:.3}",
                m.n, m.sr_t, m.sr_act, m.sr_args, m.sr, m.iou
            );
        };
        for (name, m) in &self.splits {
            row(name, m);
        }
        row("all", &self.overall);
        out
    }
}
