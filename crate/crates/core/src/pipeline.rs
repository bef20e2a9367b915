//! One conversational turn end to end: retrieve, plan, execute, transform,
//! discriminate, respond.
//!
//! Every backend call in a session gets the next value of the session's
//! call counter as its `turn_index`, so a scripted fixture can address the
//! plan, modification, selection and response calls individually.

use std::sync::Arc;
use std::time::Duration;

use crate::artifact::{ArtifactStore, ArtifactValue};
use crate::events::{
    AnswerPayload, ChoiceResolvedPayload, ErrorPayload, EventBody, EventRecorder, PlanPayload, PlanStep,
    RevisionSummary, TransformKind, TransformPayload, TurnEvent,
};
use crate::executor::{execute_graph, AdapterSet, ExecConfig, ExecEvent, StepResult};
use crate::integration::{
    discriminate_modify, discriminate_select, format_choices, render_pose_placeholder, synthesize_response,
    transform_contact, transform_shape, ShapeMeasurementModel, VertexPartMap,
};
use crate::llm::{complete_with_timeout, CompletionRequest, LlmBackend};
use crate::planner::{
    classify_shape, compose_plan_prompt, parse_emission, validate_graph, Emission, HistoryTurn, PromptContext,
};
use crate::registry::ToolCatalog;
use crate::retrieval::{Embedder, HashingEmbedder, IndexedExample, RetrievalIndex};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub plan_timeout: Duration,
    pub exec: ExecConfig,
    pub use_retrieval: bool,
    /// Show source tools next to multiple-choice options.
    pub reveal_tools_in_choices: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            plan_timeout: Duration::from_secs(60),
            exec: ExecConfig::default(),
            use_retrieval: true,
            reveal_tools_in_choices: false,
        }
    }
}

/// Per-session conversation state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionState {
    pub history: Vec<HistoryTurn>,
    /// Backend calls made so far in this session.
    pub backend_calls: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    pub answer: String,
    pub fallback: bool,
    pub events: usize,
}

pub struct Pipeline {
    catalog: ToolCatalog,
    backend: Arc<dyn LlmBackend>,
    adapters: AdapterSet,
    embedder: Arc<dyn Embedder>,
    index: Option<RetrievalIndex>,
    part_map: VertexPartMap,
    shape_model: ShapeMeasurementModel,
    store: Option<ArtifactStore>,
    config: PipelineConfig,
}

pub fn apology(stage: &str) -> String {
    format!("Sorry, I could not complete this request ({stage} failed).")
}

struct Stage(&'static str, String);

impl Pipeline {
    /// Uses the hashing embedder, the toy part map and the bundled shape
    /// model. The retrieval index is built from the catalog's documents.
    pub async fn new(catalog: ToolCatalog, backend: Arc<dyn LlmBackend>, adapters: AdapterSet) -> Self {
        let embedder: Arc<dyn Embedder> = Arc::new(HashingEmbedder::default());
        let index = RetrievalIndex::build(embedder.as_ref(), catalog.documents()).await.ok();
        Self {
            catalog,
            backend,
            adapters,
            embedder,
            index,
            part_map: VertexPartMap::toy(),
            shape_model: ShapeMeasurementModel::bundled(),
            store: None,
            config: PipelineConfig::default(),
        }
    }

    pub fn with_index(mut self, embedder: Arc<dyn Embedder>, index: Option<RetrievalIndex>) -> Self {
        self.embedder = embedder;
        self.index = index;
        self
    }

    pub fn with_part_map(mut self, map: VertexPartMap) -> Self {
        self.part_map = map;
        self
    }

    pub fn with_shape_model(mut self, model: ShapeMeasurementModel) -> Self {
        self.shape_model = model;
        self
    }

    pub fn with_store(mut self, store: ArtifactStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn with_config(mut self, config: PipelineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn catalog(&self) -> &ToolCatalog {
        &self.catalog
    }

    fn next_request(session: &mut SessionState) -> CompletionRequest {
        let request = CompletionRequest {
            prompt: String::new(),
            record_id: None,
            turn_index: Some(session.backend_calls),
        };
        session.backend_calls += 1;
        request
    }

    async fn retrieve(&self, query: &str) -> Option<IndexedExample> {
        if !self.config.use_retrieval {
            return None;
        }
        let index = self.index.as_ref()?;
        match index.retrieve(self.embedder.as_ref(), query, 1).await {
            Ok(hits) => hits.first().map(|(e, _)| (*e).clone()),
            Err(e) => {
                tracing::warn!("retrieval skipped: {e}");
                None
            }
        }
    }

    /// Runs one turn, streaming events to `sink`. Always ends with exactly
    /// one answer event; the session history gains the user and assistant
    /// turns only once the answer is known.
    pub async fn run_turn(
        &self,
        session: &mut SessionState,
        query: &str,
        images: &[String],
        sink: &mut (dyn FnMut(TurnEvent) + Send),
    ) -> TurnOutcome {
        let mut rec = EventRecorder::new(sink);
        let mut calls = session.backend_calls;
        let mut scratch = SessionState {
            history: Vec::new(),
            backend_calls: calls,
        };
        let result = self.turn_stages(&session.history, &mut scratch, query, images, &mut rec).await;
        calls = scratch.backend_calls;

        let (answer, fallback, plan) = match result {
            Ok((answer, plan)) => (answer, false, plan),
            Err(Stage(stage, cause)) => {
                rec.emit(EventBody::Error(ErrorPayload {
                    stage: stage.to_string(),
                    cause,
                }));
                (apology(stage), true, None)
            }
        };
        rec.emit(EventBody::Answer(AnswerPayload {
            text: answer.clone(),
            fallback,
        }));
        session.history.push(HistoryTurn::user(query));
        session.history.push(HistoryTurn::assistant(&answer, plan.as_deref()));
        session.backend_calls = calls;
        TurnOutcome {
            answer,
            fallback,
            events: rec.emitted(),
        }
    }

    /// Returns the answer and the raw plan if a tool was used.
    async fn turn_stages(
        &self,
        history: &[HistoryTurn],
        session: &mut SessionState,
        query: &str,
        images: &[String],
        rec: &mut EventRecorder<'_>,
    ) -> Result<(String, Option<String>), Stage> {
        let retrieved = self.retrieve(query).await;
        let ctx = PromptContext {
            query: query.to_string(),
            image_refs: images.to_vec(),
            image_caption: None,
            history: history.to_vec(),
            retrieved: retrieved.clone(),
            tool_block: self.catalog.render_tool_definitions(None).expect("full catalog renders"),
        };
        let request = Self::next_request(session).with_prompt(compose_plan_prompt(&ctx));
        let raw = complete_with_timeout(self.backend.as_ref(), &request, self.config.plan_timeout)
            .await
            .map_err(|e| Stage("plan", e.to_string()))?;

        let parsed = parse_emission(&raw);
        let graph = match &parsed {
            Ok(emission) => emission.to_graph().ok().flatten(),
            Err(_) => None,
        };
        rec.emit(EventBody::Plan(PlanPayload {
            raw: raw.clone(),
            emission: parsed.as_ref().ok().cloned(),
            shape: graph.as_ref().map(classify_shape),
            steps: graph
                .as_ref()
                .map(|g| {
                    g.steps
                        .iter()
                        .map(|s| PlanStep {
                            id: s.id,
                            tool: s.tool.clone(),
                            depends_on: s.dependencies().into_iter().collect(),
                        })
                        .collect()
                })
                .unwrap_or_default(),
            retrieved_example: retrieved.map(|e| e.id),
        }));
        let emission = parsed.map_err(|e| Stage("parse", e.to_string()))?;

        let graph = match &emission {
            Emission::Invocation { invocation } if !invocation.use_tool => {
                if let Some(response) = &invocation.response {
                    return Ok((response.clone(), None));
                }
                None
            }
            other => other.to_graph().map_err(|e| Stage("parse", e.to_string()))?,
        };
        let Some(graph) = graph else {
            let request = Self::next_request(session);
            let answer = synthesize_response(self.backend.as_ref(), query, &[], &request)
                .await
                .map_err(|e| Stage("respond", e.to_string()))?;
            return Ok((answer, None));
        };

        let validated = validate_graph(&graph, &self.catalog).map_err(|e| Stage("validate", e.to_string()))?;
        let mut forward = |e: ExecEvent| match e {
            ExecEvent::StepStarted { step_id, tool, args } => rec.emit(EventBody::StepStarted { step_id, tool, args }),
            ExecEvent::StepFinished(r) => rec.emit(EventBody::StepFinished(r)),
        };
        let trace = execute_graph(&validated, &self.adapters, images, &self.config.exec, &mut forward)
            .await
            .map_err(|e| Stage("execute", e.to_string()))?;

        let sinks: Vec<(StepResult, ArtifactValue)> =
            trace.sink_outputs().into_iter().map(|(r, o)| (r.clone(), o.clone())).collect();
        if sinks.is_empty() {
            let cause = trace
                .results
                .iter()
                .find_map(|r| r.error.clone())
                .unwrap_or_else(|| "no step produced output".into());
            return Err(Stage("execute", cause));
        }

        let mut transformed: Vec<(&'static str, String, String)> = Vec::new();
        for (result, output) in &sinks {
            let payload = self.transform(session, query, result, output).await?;
            transformed.push((output.kind(), payload.source_tool.clone(), payload.rendering.clone()));
            rec.emit(EventBody::Transform(payload));
        }

        let renderings = self.discriminate(session, query, transformed, rec).await?;
        let request = Self::next_request(session);
        let answer = synthesize_response(self.backend.as_ref(), query, &renderings, &request)
            .await
            .map_err(|e| Stage("respond", e.to_string()))?;
        Ok((answer, Some(raw)))
    }

    async fn transform(
        &self,
        session: &mut SessionState,
        query: &str,
        result: &StepResult,
        output: &ArtifactValue,
    ) -> Result<TransformPayload, Stage> {
        let mut payload = TransformPayload {
            step_id: result.step_id,
            source_tool: result.tool.clone(),
            transform: TransformKind::Passthrough,
            rendering: String::new(),
            measurements: None,
            flags: Vec::new(),
            revision: None,
            image_ref: None,
        };
        match output {
            ArtifactValue::ContactVector(contact) => {
                payload.transform = TransformKind::Contact;
                payload.rendering =
                    transform_contact(contact, &self.part_map).map_err(|e| Stage("transform", e.to_string()))?;
            }
            ArtifactValue::ShapeParams(beta) => {
                payload.transform = TransformKind::Shape;
                let reading = transform_shape(beta, &self.shape_model);
                payload.flags = reading.flags.clone();
                let mut final_reading = reading.clone();
                if !reading.flags.is_empty() {
                    let request = Self::next_request(session);
                    let summary = match discriminate_modify(self.backend.as_ref(), query, &reading, &request).await {
                        Ok(revision) => {
                            final_reading = revision.reading;
                            RevisionSummary {
                                replaced: revision.replaced,
                                restored: revision.restored,
                                fallback: false,
                                cause: None,
                            }
                        }
                        Err(e) => RevisionSummary {
                            replaced: Vec::new(),
                            restored: Vec::new(),
                            fallback: true,
                            cause: Some(e.to_string()),
                        },
                    };
                    payload.revision = Some(summary);
                }
                payload.rendering = final_reading.sentence.clone();
                payload.measurements = Some(final_reading.measurements);
            }
            ArtifactValue::MeasurementSet(m) => {
                payload.transform = TransformKind::Shape;
                payload.rendering = m.sentence();
                payload.measurements = Some(*m);
                payload.flags = m.check();
            }
            ArtifactValue::PoseParams(pose) => {
                payload.transform = TransformKind::Pose;
                let id = render_pose_placeholder(pose);
                if let Some(store) = &self.store {
                    store
                        .materialize_placeholder(&id)
                        .map_err(|e| Stage("transform", e.to_string()))?;
                }
                payload.rendering = format!("Rendered body pose: {id}");
                payload.image_ref = Some(id);
            }
            ArtifactValue::Text(text) => payload.rendering = text.clone(),
            ArtifactValue::ImageRef(id) => {
                payload.rendering = format!("Generated image: {id}");
                payload.image_ref = Some(id.clone());
            }
            ArtifactValue::MotionRef(id) => payload.rendering = format!("Generated motion: {id}"),
        }
        Ok(payload)
    }

    /// Results of the same artifact kind compete: each such group of two or
    /// more is put to the model as a multiple-choice question and replaced
    /// by the selected option. Other renderings pass through in order.
    async fn discriminate(
        &self,
        session: &mut SessionState,
        query: &str,
        transformed: Vec<(&'static str, String, String)>,
        rec: &mut EventRecorder<'_>,
    ) -> Result<Vec<String>, Stage> {
        let mut out = Vec::new();
        let mut done: Vec<&str> = Vec::new();
        for (kind, _, rendering) in &transformed {
            let group: Vec<(String, String)> = transformed
                .iter()
                .filter(|(k, _, _)| k == kind)
                .map(|(_, tool, r)| (tool.clone(), r.clone()))
                .collect();
            if group.len() < 2 {
                out.push(rendering.clone());
                continue;
            }
            if done.contains(kind) {
                continue;
            }
            done.push(kind);
            let choices = format_choices(query, &group).map_err(|e| Stage("discriminate", e.to_string()))?;
            rec.emit(EventBody::ChoicePresented(choices.clone()));
            let request = Self::next_request(session);
            let selection =
                discriminate_select(self.backend.as_ref(), &choices, self.config.reveal_tools_in_choices, &request)
                    .await
                    .map_err(|e| Stage("discriminate", e.to_string()))?;
            rec.emit(EventBody::ChoiceResolved(ChoiceResolvedPayload {
                label: selection.label,
                source_tool: selection.source_tool.clone(),
                fallback: selection.fallback,
                rationale: selection.rationale.clone(),
            }));
            out.push(selection.rendering);
        }
        Ok(out)
    }
}
