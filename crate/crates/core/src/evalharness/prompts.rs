//! Data-construction prompt templates. Slots are written `{name}`; names
//! may contain spaces (`{tool description}`). Substitution is a single
//! pass, so slot values are inserted verbatim even if they contain braces.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use super::EvalError;

pub const TEMPLATE_VERSION: &str = "templates/v1";

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_ ]+)\}").expect("static regex"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ToolcardFromPaper,
    InstructionsFromCaption,
    HoiIntegration,
    ShapeIntegration,
    ToolGraphConstruction,
    MultiturnMerge,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::ToolcardFromPaper,
        TemplateId::InstructionsFromCaption,
        TemplateId::HoiIntegration,
        TemplateId::ShapeIntegration,
        TemplateId::ToolGraphConstruction,
        TemplateId::MultiturnMerge,
    ];

    pub fn text(self) -> &'static str {
        match self {
            TemplateId::ToolcardFromPaper => include_str!("../../templates/toolcard_from_paper.txt"),
            TemplateId::InstructionsFromCaption => include_str!("../../templates/instructions_from_caption.txt"),
            TemplateId::HoiIntegration => include_str!("../../templates/hoi_integration.txt"),
            TemplateId::ShapeIntegration => include_str!("../../templates/shape_integration.txt"),
            TemplateId::ToolGraphConstruction => include_str!("../../templates/tool_graph_construction.txt"),
            TemplateId::MultiturnMerge => include_str!("../../templates/multiturn_merge.txt"),
        }
    }

    /// Slot names in order of first appearance.
    pub fn slots(self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        SLOT.captures_iter(self.text())
            .map(|c| c[1].to_string())
            .filter(|s| seen.insert(s.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationPromptSpec {
    pub template: TemplateId,
    pub slots: BTreeMap<String, String>,
}

impl GenerationPromptSpec {
    pub fn new(template: TemplateId) -> Self {
        Self {
            template,
            slots: BTreeMap::new(),
        }
    }

    pub fn slot(mut self, name: &str, value: &str) -> Self {
        self.slots.insert(name.to_string(), value.to_string());
        self
    }
}

pub fn render_generation_prompt(spec: &GenerationPromptSpec) -> Result<String, EvalError> {
    if let Some(missing) = spec.template.slots().into_iter().find(|s| !spec.slots.contains_key(s)) {
        return Err(EvalError::MissingSlot(missing));
    }
    Ok(SLOT
        .replace_all(spec.template.text(), |c: &Captures| spec.slots[&c[1]].clone())
        .into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_slots() {
        assert_eq!(TemplateId::ToolcardFromPaper.slots(), ["paper_text"]);
        assert_eq!(TemplateId::InstructionsFromCaption.slots(), ["caption", "tool description", "examples"]);
        assert_eq!(TemplateId::ToolGraphConstruction.slots(), ["caption", "tool description", "examples"]);
        assert_eq!(TemplateId::HoiIntegration.slots(), ["contact_description"]);
        assert_eq!(TemplateId::ShapeIntegration.slots(), ["measurement_description"]);
        assert_eq!(TemplateId::MultiturnMerge.slots(), ["dialogue"]);
    }

    #[test]
    fn toolcard_prompt_keeps_fixed_instruction() {
        let spec = GenerationPromptSpec::new(TemplateId::ToolcardFromPaper).slot("paper_text", "We present a regressor.");
        let out = render_generation_prompt(&spec).unwrap();
        assert!(out.contains("Method name is a tool to do something"));
        assert!(out.ends_with("We present a regressor.\n"));
    }

    #[test]
    fn verbatim_substitution_and_missing_slot() {
        let caption = "A {caption} skier [10, 20, 30, 40]";
        let spec = GenerationPromptSpec::new(TemplateId::InstructionsFromCaption)
            .slot("caption", caption)
            .slot("tool description", "1. Image Caption: ...")
            .slot("examples", "Describe it, [Image Caption, example.jpg]");
        let out = render_generation_prompt(&spec).unwrap();
        assert!(out.contains(&format!("Image caption: \"{caption}\"")));
        let partial = GenerationPromptSpec::new(TemplateId::InstructionsFromCaption).slot("caption", "x");
        match render_generation_prompt(&partial) {
            Err(EvalError::MissingSlot(s)) => assert_eq!(s, "tool description"),
            other => panic!("{other:?}"),
        }
    }
}
