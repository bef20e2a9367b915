//! Turning tool artifacts into text the language model can read, choosing
//! between competing results, repairing implausible measurements, and
//! composing the final answer.

mod choices;
mod contact;
mod modify;
mod respond;
mod shape;

pub use choices::{discriminate_select, format_choices, parse_selection, ChoiceOption, ChoiceSet, Selection, CHOICE_QUESTION};
pub use contact::{transform_contact, VertexPartMap, NO_CONTACT, PART_VOCABULARY};
pub use modify::{discriminate_modify, modify_prompt, parse_revision, Revision};
pub use respond::{compose_response_prompt, synthesize_response};
pub use shape::{
    reading, render_pose_placeholder, transform_shape, MeasurementField, MeasurementSet, PlausibilityFlag,
    ShapeMeasurementModel, ShapeReading, HEIGHT_LIMIT_M, WEIGHT_LIMIT_KG,
};

use crate::llm::BackendError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum IntegrationError {
    #[error("contact vector has {actual} entries, part map expects {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid vertex-part map: {0}")]
    InvalidPartMap(String),
    #[error("invalid shape model: {0}")]
    InvalidShapeModel(String),
    #[error("need at least 2 options, got {0}")]
    TooFewOptions(usize),
    #[error("at most 26 options supported, got {0}")]
    TooManyOptions(usize),
    #[error("no option label in reply {0:?}")]
    UnparseableSelection(String),
    #[error("no revised value for a flagged field in reply {0:?}")]
    UnparseableRevision(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}
