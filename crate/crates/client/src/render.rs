//! Plain-text rendering of turn events for the terminal.

use agentloom_core::events::{EventBody, TurnEvent};
use agentloom_core::executor::StepStatus;
use agentloom_core::ArtifactValue;

pub fn artifact(value: &ArtifactValue) -> String {
    match value {
        ArtifactValue::Text(t) => t.clone(),
        ArtifactValue::ImageRef(id) => format!("image {id}"),
        ArtifactValue::MotionRef(id) => format!("motion {id}"),
        ArtifactValue::PoseParams(p) => format!("pose parameters ({} values)", p.values().len()),
        ArtifactValue::ShapeParams(s) => format!("shape parameters ({} values)", s.values().len()),
        ArtifactValue::ContactVector(c) => {
            format!("contact labels ({} of {} vertices)", c.bits().iter().filter(|b| **b).count(), c.bits().len())
        }
        ArtifactValue::MeasurementSet(m) => m.sentence(),
    }
}

/// One or more lines for `event`, or `None` for events a person does not
/// need to see.
pub fn event(event: &TurnEvent) -> Option<String> {
    Some(match &event.body {
        EventBody::Plan(plan) => {
            if plan.steps.is_empty() {
                return None;
            }
            let steps: Vec<String> = plan
                .steps
                .iter()
                .map(|s| {
                    if s.depends_on.is_empty() {
                        format!("  [{}] {}", s.id, s.tool)
                    } else {
                        let deps: Vec<String> = s.depends_on.iter().map(|d| d.to_string()).collect();
                        format!("  [{}] {} (after {})", s.id, s.tool, deps.join(", "))
                    }
                })
                .collect();
            format!("plan:\n{}", steps.join("\n"))
        }
        EventBody::StepStarted { step_id, tool, .. } => format!("  [{step_id}] {tool} ..."),
        EventBody::StepFinished(r) => match (r.status, &r.output) {
            (StepStatus::Ok, Some(out)) => format!("  [{}] done: {}", r.step_id, artifact(out)),
            _ => format!("  [{}] failed: {}", r.step_id, r.error.as_deref().unwrap_or("unknown error")),
        },
        EventBody::Transform(t) => format!("  result of [{}]: {}", t.step_id, t.rendering),
        EventBody::ChoicePresented(c) => {
            let options: Vec<String> = c.options.iter().map(|o| format!("  {}. {}", o.label, o.rendering)).collect();
            format!("choosing between:\n{}", options.join("\n"))
        }
        EventBody::ChoiceResolved(c) => format!("  chose {} ({})", c.label, c.source_tool),
        EventBody::Error(e) => format!("error in {}: {}", e.stage, e.cause),
        EventBody::Answer(a) => format!("\n{}\n", a.text),
    })
}
