//! Reference implementations and generators shared by the property tests
//! and the acceptance suite. Every oracle here is written from the metric
//! or transform definition, without calling the code under test.

#![allow(dead_code)]

pub mod criteria;

use std::collections::HashMap;

use agentloom_core::artifact::{ArtifactValue, ContactVector};
use agentloom_core::executor::{MockAdapter, MockConfig, StepResult, StepStatus, ToolArgs};
use agentloom_core::planner::{Binding, GraphStep, StepArg, TemplatePart, ToolGraph, ValidatedGraph};
use agentloom_core::ToolCatalog;
use rand::seq::SliceRandom;
use rand::Rng;

pub const WORDS: [&str; 12] = [
    "the", "man", "woman", "skier", "in", "red", "left", "of", "image", "a", "pose", "jacket",
];

pub fn random_sentence(rng: &mut impl Rng, max_len: usize) -> String {
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// BLEU-4 by enumerating every candidate n-gram and counting occurrences
/// with plain scans.
pub fn bleu_oracle(candidate: &str, reference: &str) -> f64 {
    let cand: Vec<String> = candidate.split_whitespace().map(|t| t.to_lowercase()).collect();
    let refr: Vec<String> = reference.split_whitespace().map(|t| t.to_lowercase()).collect();
    if cand.is_empty() {
        return 0.0;
    }
    let count = |tokens: &[String], gram: &[String]| {
        if tokens.len() < gram.len() {
            return 0;
        }
        (0..=tokens.len() - gram.len()).filter(|&i| tokens[i..i + gram.len()] == *gram).count()
    };
    let mut product = 1.0;
    for n in 1..=4 {
        if cand.len() < n {
            continue; // precision 1
        }
        let total = cand.len() - n + 1;
        let mut seen: Vec<&[String]> = Vec::new();
        let mut matches = 0;
        for i in 0..total {
            let gram = &cand[i..i + n];
            if seen.contains(&gram) {
                continue;
            }
            seen.push(gram);
            matches += count(&cand, gram).min(count(&refr, gram));
        }
        let p = if matches > 0 {
            matches as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        product *= p;
    }
    let c = cand.len() as f64;
    let r = refr.len() as f64;
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * product.powf(0.25)
}

/// Part names touched by `contact`, found by checking every part against
/// every vertex.
pub fn contact_oracle(bits: &[bool], parts: &[String], assignment: &[usize]) -> String {
    let mut hit = Vec::new();
    for (p, name) in parts.iter().enumerate() {
        if (0..bits.len()).any(|v| bits[v] && assignment[v] == p) {
            hit.push(name.as_str());
        }
    }
    if hit.is_empty() {
        "No contact detected.".to_string()
    } else {
        format!("Contact detected on: {}", hit.join(", "))
    }
}

pub fn random_contact(rng: &mut impl Rng, len: usize) -> ContactVector {
    let p: f64 = rng.gen_range(0.0..1.0);
    ContactVector::new((0..len).map(|_| rng.gen_bool(p)).collect())
}

/// Tools whose mock output can be spliced into text.
pub fn is_text_like(tool: &str) -> bool {
    matches!(
        agentloom_core::executor::family_of(tool).output_kind(),
        "text" | "image_ref" | "motion_ref"
    )
}

fn literal(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(1..=3);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// A random binding that only references steps before `id`.
fn random_binding(rng: &mut impl Rng, id: usize, splice_ok: &dyn Fn(usize) -> bool) -> Binding {
    let spliceable: Vec<usize> = (0..id).filter(|&k| splice_ok(k)).collect();
    match rng.gen_range(0..4) {
        0 => Binding::Literal(literal(rng)),
        1 => Binding::UserImage(0),
        2 if id > 0 => Binding::StepOutput(rng.gen_range(0..id)),
        3 if !spliceable.is_empty() => Binding::Interpolated(vec![
            TemplatePart::Text(format!("{} ", literal(rng))),
            TemplatePart::Step(*spliceable.choose(rng).unwrap()),
            TemplatePart::Text(" in ".into()),
            TemplatePart::Image(0),
        ]),
        _ => Binding::Literal(literal(rng)),
    }
}

/// A random graph of up to `max_steps` catalog tools whose arguments fill
/// each card's argument list, named or positional per step.
pub fn random_graph(rng: &mut impl Rng, catalog: &ToolCatalog, max_steps: usize) -> ToolGraph {
    let n = rng.gen_range(1..=max_steps);
    let mut steps: Vec<GraphStep> = Vec::with_capacity(n);
    for id in 0..n {
        let card = catalog.cards().choose(rng).unwrap();
        let named = rng.gen_bool(0.5);
        let tools: Vec<String> = steps.iter().map(|s| s.tool.clone()).collect();
        let splice_ok = |k: usize| is_text_like(&tools[k]);
        let args = card
            .args
            .iter()
            .map(|spec| StepArg {
                name: named.then(|| spec.name.clone()),
                binding: random_binding(rng, id, &splice_ok),
            })
            .collect();
        steps.push(GraphStep {
            id,
            tool: card.name.clone(),
            args,
        });
    }
    ToolGraph { steps }
}

/// Runs a validated graph one step at a time in id order, binding
/// arguments by hand and calling the mocks directly.
pub fn sequential_reference(graph: &ValidatedGraph, config: &MockConfig, images: &[String]) -> Vec<(StepStatus, Option<ArtifactValue>)> {
    let mut out: Vec<(StepStatus, Option<ArtifactValue>)> = Vec::new();
    let mut outputs: HashMap<usize, ArtifactValue> = HashMap::new();
    for (i, step) in graph.graph.steps.iter().enumerate() {
        let deps = step.dependencies();
        if deps.iter().any(|d| out[*d].0 != StepStatus::Ok) {
            out.push((StepStatus::Failed, None));
            continue;
        }
        let mut args = ToolArgs::new();
        let mut bindable = true;
        for (name, binding) in &graph.bindings[i] {
            let value = match binding {
                Binding::Literal(t) => ArtifactValue::Text(t.clone()),
                Binding::UserImage(j) => ArtifactValue::ImageRef(images[*j].clone()),
                Binding::StepOutput(k) => outputs[k].clone(),
                Binding::Interpolated(parts) => {
                    let mut text = String::new();
                    for part in parts {
                        match part {
                            TemplatePart::Text(t) => text.push_str(t),
                            TemplatePart::Image(j) => text.push_str(&images[*j]),
                            TemplatePart::Step(k) => match &outputs[k] {
                                ArtifactValue::Text(s) | ArtifactValue::ImageRef(s) | ArtifactValue::MotionRef(s) => {
                                    text.push_str(s)
                                }
                                ArtifactValue::MeasurementSet(m) => text.push_str(&m.sentence()),
                                _ => bindable = false,
                            },
                        }
                    }
                    ArtifactValue::Text(text)
                }
            };
            args.insert(name.clone(), value);
        }
        if !bindable {
            out.push((StepStatus::Failed, None));
            continue;
        }
        match MockAdapter::new(&step.tool, config.clone()).call(&args) {
            Ok(v) => {
                outputs.insert(i, v.clone());
                out.push((StepStatus::Ok, Some(v)));
            }
            Err(_) => out.push((StepStatus::Failed, None)),
        }
    }
    out
}

/// Every dependency edge finishes before its dependent starts.
pub fn edges_respected(graph: &ValidatedGraph, results: &[StepResult]) -> bool {
    graph.graph.edges().iter().all(|&(u, v)| match (&results[u].timing, &results[v].timing) {
        (Some(a), Some(b)) => a.finished_us <= b.started_us,
        _ => true,
    })
}
