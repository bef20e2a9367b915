use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::shape::{reading, MeasurementField, MeasurementSet, ShapeReading};
use super::IntegrationError;
use crate::llm::{CompletionRequest, LlmBackend};

static FIELD_VALUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(height|weight|chest|waist|hip)\b\s*[:=]\s*(-?\d+(?:\.\d+)?)").expect("static regex")
});

fn field_from_label(label: &str) -> MeasurementField {
    match label.to_ascii_lowercase().as_str() {
        "height" => MeasurementField::Height,
        "weight" => MeasurementField::Weight,
        "chest" => MeasurementField::Chest,
        "waist" => MeasurementField::Waist,
        _ => MeasurementField::Hip,
    }
}

/// `field: number` pairs in a reply; the first mention of a field wins.
pub fn parse_revision(reply: &str) -> MeasurementSet {
    let mut set = MeasurementSet::default();
    for cap in FIELD_VALUE.captures_iter(reply) {
        let field = field_from_label(&cap[1]);
        if set.get(field).is_none() {
            if let Ok(v) = cap[2].parse::<f64>() {
                set.set(field, Some(v));
            }
        }
    }
    set
}

pub fn modify_prompt(query: &str, original: &ShapeReading) -> String {
    let mut out = format!(
        "{query}\nA tool produced this result:\n{}\nThe following values are implausible:",
        original.sentence
    );
    for flag in &original.flags {
        out.push_str(&format!(
            "\n- {} = {} ({})",
            flag.field.label(),
            flag.value,
            flag.reason
        ));
    }
    out.push_str("\nReply with corrected values as `field: number`, one per line, in meters and kilograms.");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revision {
    pub reading: ShapeReading,
    /// Flagged fields that took the model's value.
    pub replaced: Vec<MeasurementField>,
    /// Unflagged fields the reply tried to change; the original was kept.
    pub restored: Vec<MeasurementField>,
    /// The backend was asked.
    pub consulted: bool,
}

/// Repairs flagged measurements via the backend. Unflagged fields are never
/// changed. Fails with `UnparseableRevision` when no flagged field receives
/// a plausible value; callers keep the original reading in that case.
pub async fn discriminate_modify(
    backend: &dyn LlmBackend,
    query: &str,
    original: &ShapeReading,
    request: &CompletionRequest,
) -> Result<Revision, IntegrationError> {
    if original.flags.is_empty() {
        return Ok(Revision {
            reading: original.clone(),
            replaced: Vec::new(),
            restored: Vec::new(),
            consulted: false,
        });
    }
    let reply = backend.complete(&request.with_prompt(modify_prompt(query, original))).await?;
    apply_revision(original, &reply).map(|mut r| {
        r.consulted = true;
        r
    })
}

fn apply_revision(original: &ShapeReading, reply: &str) -> Result<Revision, IntegrationError> {
    let proposed = parse_revision(reply);
    let flagged: Vec<MeasurementField> = original.flags.iter().map(|f| f.field).collect();
    let mut revised = original.measurements;
    let mut replaced = Vec::new();
    let mut restored = Vec::new();
    for field in MeasurementField::ALL {
        let Some(new) = proposed.get(field) else { continue };
        if flagged.contains(&field) {
            let mut probe = MeasurementSet::default();
            probe.set(field, Some(new));
            if probe.check().is_empty() {
                revised.set(field, Some(new));
                replaced.push(field);
            }
        } else if original.measurements.get(field).map(|v| format!("{v:.2}")) != Some(format!("{new:.2}")) {
            // restating an unflagged value at display precision is not drift
            restored.push(field);
        }
    }
    if replaced.is_empty() {
        return Err(IntegrationError::UnparseableRevision(reply.to_string()));
    }
    Ok(Revision {
        reading: reading(revised),
        replaced,
        restored,
        consulted: true,
    })
}
