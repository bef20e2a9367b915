//! Events emitted while a turn runs. On the wire each event is
//! `{"seq": n, "kind": "...", "payload": {...}}` with `seq` dense from 0
//! within a turn.

use serde::{Deserialize, Serialize};

use crate::executor::{StepResult, ToolArgs};
use crate::integration::{ChoiceSet, MeasurementField, MeasurementSet, PlausibilityFlag};
use crate::planner::{Emission, GraphShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub seq: usize,
    #[serde(flatten)]
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub id: usize,
    pub tool: String,
    pub depends_on: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanPayload {
    pub raw: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emission: Option<Emission>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<GraphShape>,
    pub steps: Vec<PlanStep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieved_example: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Contact,
    Shape,
    Pose,
    Passthrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionSummary {
    pub replaced: Vec<MeasurementField>,
    pub restored: Vec<MeasurementField>,
    /// The revision failed and the original reading was kept.
    pub fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformPayload {
    pub step_id: usize,
    pub source_tool: String,
    pub transform: TransformKind,
    pub rendering: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measurements: Option<MeasurementSet>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub flags: Vec<PlausibilityFlag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub revision: Option<RevisionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceResolvedPayload {
    pub label: char,
    pub source_tool: String,
    pub fallback: bool,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub stage: String,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerPayload {
    pub text: String,
    /// The text is the apology used after a stage failure.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Plan(PlanPayload),
    StepStarted { step_id: usize, tool: String, args: ToolArgs },
    StepFinished(StepResult),
    Transform(TransformPayload),
    ChoicePresented(ChoiceSet),
    ChoiceResolved(ChoiceResolvedPayload),
    Error(ErrorPayload),
    Answer(AnswerPayload),
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Plan(_) => "plan",
            EventBody::StepStarted { .. } => "step_started",
            EventBody::StepFinished(_) => "step_finished",
            EventBody::Transform(_) => "transform",
            EventBody::ChoicePresented(_) => "choice_presented",
            EventBody::ChoiceResolved(_) => "choice_resolved",
            EventBody::Error(_) => "error",
            EventBody::Answer(_) => "answer",
        }
    }
}

/// Numbers events and forwards them to a sink.
pub struct EventRecorder<'a> {
    next: usize,
    sink: &'a mut (dyn FnMut(TurnEvent) + Send),
}

impl<'a> EventRecorder<'a> {
    pub fn new(sink: &'a mut (dyn FnMut(TurnEvent) + Send)) -> Self {
        Self { next: 0, sink }
    }

    pub fn emit(&mut self, body: EventBody) {
        let event = TurnEvent { seq: self.next, body };
        self.next += 1;
        (self.sink)(event);
    }

    pub fn emitted(&self) -> usize {
        self.next
    }
}

/// Removes every `timing` object, for comparisons that ignore wall-clock data.
pub fn strip_timing(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("timing");
            map.values_mut().for_each(strip_timing);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}
