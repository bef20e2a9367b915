//! Tool cards, tool documents and the catalog that holds them.
//!
//! A catalog is persisted as one JSON document:
//!
//! ```json
//! {"tools": [{"name", "description", "category", "seen", "args": [{"name", "kind", "required", "description"}]}],
//!  "documents": [{"tool_name", "qa_pairs": [{"query", "invocation": {"thought", "action", "action_input"}}]}]}
//! ```
//!
//! Documents may also be sharded: a catalog directory holds `catalog.json`
//! plus any number of `documents/*.json` files, each one `ToolDocument`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::planner::ToolInvocation;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("tool {0:?} is already registered")]
    DuplicateToolName(String),
    #[error("invalid tool card at {path}: {reason}")]
    InvalidCard { path: String, reason: String },
    #[error("unknown tool {0:?}")]
    UnknownToolName(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing field `{field}` at line {line}")]
    MissingField { field: String, line: usize },
    #[error("catalog invariant violated: {0}")]
    InvariantViolation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgKind {
    FileRef,
    Text,
    PersonDescription,
    Numeric,
}

impl ArgKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArgKind::FileRef => "file_ref",
            ArgKind::Text => "text",
            ArgKind::PersonDescription => "person_description",
            ArgKind::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    pub kind: ArgKind,
    pub required: bool,
    pub description: String,
}

impl ArgSpec {
    pub fn new(name: &str, kind: ArgKind, description: &str) -> Self {
        Self {
            name: name.to_string(),
            kind,
            required: true,
            description: description.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Perception,
    Reasoning,
    Generation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCard {
    pub name: String,
    pub description: String,
    pub category: Category,
    /// Whether the tool belongs to the training-seen split.
    pub seen: bool,
    pub args: Vec<ArgSpec>,
    /// Explicit marker for tools that take no arguments at all.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_args: bool,
}

impl ToolCard {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let invalid = |path: &str, reason: &str| RegistryError::InvalidCard {
            path: path.to_string(),
            reason: reason.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(invalid("name", "empty name"));
        }
        if self.name != self.name.trim() {
            return Err(invalid("name", "leading or trailing whitespace"));
        }
        // the step-list grammar reserves these characters
        if let Some(c) = self
            .name
            .chars()
            .find(|c| matches!(c, '\n' | '\r' | ',' | '[' | ']' | ';'))
        {
            return Err(invalid("name", &format!("reserved character {c:?}")));
        }
        if self.description.trim().is_empty() {
            return Err(invalid("description", "empty description"));
        }
        if let Some(expected) = standard_category(&self.name) {
            if expected != self.category {
                return Err(invalid(
                    "category",
                    &format!("{:?} is a {:?} tool", self.name, expected),
                ));
            }
        }
        match (self.args.is_empty(), self.no_args) {
            (true, false) => return Err(invalid("args", "no arguments and no zero-arg marker")),
            (false, true) => return Err(invalid("no_args", "zero-arg marker on a tool with arguments")),
            _ => {}
        }
        let mut names = HashSet::new();
        for (i, arg) in self.args.iter().enumerate() {
            if !is_identifier(&arg.name) {
                return Err(invalid(&format!("args[{i}].name"), "not an identifier"));
            }
            if !names.insert(arg.name.as_str()) {
                return Err(invalid(
                    &format!("args[{i}].name"),
                    &format!("duplicate argument name {:?}", arg.name),
                ));
            }
        }
        Ok(())
    }

    pub fn arg(&self, name: &str) -> Option<&ArgSpec> {
        self.args.iter().find(|a| a.name == name)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub query: String,
    pub invocation: ToolInvocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDocument {
    pub tool_name: String,
    pub qa_pairs: Vec<QaPair>,
}

impl ToolDocument {
    pub fn validate(&self) -> Result<(), RegistryError> {
        if self.qa_pairs.is_empty() {
            return Err(RegistryError::InvariantViolation(format!(
                "document for {:?} has no question-answer pairs",
                self.tool_name
            )));
        }
        for (i, pair) in self.qa_pairs.iter().enumerate() {
            if pair.invocation.action.as_deref() != Some(self.tool_name.as_str()) {
                return Err(RegistryError::InvariantViolation(format!(
                    "document for {:?}: qa_pairs[{i}] invokes {:?}",
                    self.tool_name, pair.invocation.action
                )));
            }
        }
        Ok(())
    }
}

/// Registered tools in registration order, plus their documents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolCatalog {
    cards: Vec<ToolCard>,
    documents: Vec<ToolDocument>,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    tools: Vec<ToolCard>,
    #[serde(default)]
    documents: Vec<ToolDocument>,
}

impl ToolCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// The bundled catalog of 26 human-centric tools.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../fixtures/catalog.json"))
            .expect("bundled catalog is valid")
    }

    /// Returns a new catalog with `card` (and `doc`, if given) added.
    pub fn register(&self, card: ToolCard, doc: Option<ToolDocument>) -> Result<Self, RegistryError> {
        let mut next = self.clone();
        next.insert(card, doc)?;
        Ok(next)
    }

    /// In-place registration, used while a catalog is still being assembled.
    pub fn insert(&mut self, card: ToolCard, doc: Option<ToolDocument>) -> Result<(), RegistryError> {
        if self.card(&card.name).is_some() {
            return Err(RegistryError::DuplicateToolName(card.name));
        }
        card.validate()?;
        if let Some(doc) = &doc {
            if doc.tool_name != card.name {
                return Err(RegistryError::InvariantViolation(format!(
                    "document for {:?} registered with card {:?}",
                    doc.tool_name, card.name
                )));
            }
            doc.validate()?;
        }
        self.cards.push(card);
        if let Some(doc) = doc {
            self.documents.push(doc);
        }
        Ok(())
    }

    /// Adds or extends the document of an already registered tool.
    pub fn add_document(&mut self, doc: ToolDocument) -> Result<(), RegistryError> {
        if self.card(&doc.tool_name).is_none() {
            return Err(RegistryError::InvariantViolation(format!(
                "document references unregistered tool {:?}",
                doc.tool_name
            )));
        }
        doc.validate()?;
        match self.documents.iter_mut().find(|d| d.tool_name == doc.tool_name) {
            Some(existing) => existing.qa_pairs.extend(doc.qa_pairs),
            None => self.documents.push(doc),
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn cards(&self) -> &[ToolCard] {
        &self.cards
    }

    pub fn card(&self, name: &str) -> Option<&ToolCard> {
        self.cards.iter().find(|c| c.name == name)
    }

    pub fn documents(&self) -> &[ToolDocument] {
        &self.documents
    }

    pub fn document(&self, name: &str) -> Option<&ToolDocument> {
        self.documents.iter().find(|d| d.tool_name == name)
    }

    /// Renders the numbered tool-definition block shown to the planner.
    ///
    /// Each entry reads `N. name: description, args: a (kind), b (kind)`.
    /// With `subset`, only the named tools are rendered, still in
    /// registration order.
    pub fn render_tool_definitions(&self, subset: Option<&[String]>) -> Result<String, RegistryError> {
        let selected: Vec<&ToolCard> = match subset {
            None => self.cards.iter().collect(),
            Some(names) => {
                for name in names {
                    if self.card(name).is_none() {
                        return Err(RegistryError::UnknownToolName(name.clone()));
                    }
                }
                self.cards
                    .iter()
                    .filter(|c| names.iter().any(|n| n == &c.name))
                    .collect()
            }
        };
        let mut out = String::new();
        for (i, card) in selected.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let args = if card.args.is_empty() {
                "none".to_string()
            } else {
                card.args
                    .iter()
                    .map(|a| format!("{} ({})", a.name, a.kind.as_str()))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let _ = write!(out, "{}. {}: {}, args: {}", i + 1, card.name, card.description, args);
        }
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let file: CatalogFile = serde_json::from_str(text).map_err(map_json_error)?;
        let mut catalog = ToolCatalog::new();
        for card in file.tools {
            catalog.insert(card, None)?;
        }
        for doc in file.documents {
            catalog.add_document(doc)?;
        }
        Ok(catalog)
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            tools: self.cards.clone(),
            documents: self.documents.clone(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    /// Loads a catalog file, or a catalog directory with sharded documents.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let path = path.as_ref();
        if path.is_dir() {
            let mut catalog = Self::from_json(&read(&path.join("catalog.json"))?)?;
            let docs_dir = path.join("documents");
            if docs_dir.is_dir() {
                let mut shards: Vec<_> = std::fs::read_dir(&docs_dir)
                    .map_err(|source| io_error(&docs_dir, source))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e == "json"))
                    .collect();
                shards.sort();
                for shard in shards {
                    let doc: ToolDocument =
                        serde_json::from_str(&read(&shard)?).map_err(map_json_error)?;
                    catalog.add_document(doc)?;
                }
            }
            Ok(catalog)
        } else {
            Self::from_json(&read(path)?)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RegistryError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| io_error(path, source))
    }
}

fn read(path: &Path) -> Result<String, RegistryError> {
    std::fs::read_to_string(path).map_err(|source| io_error(path, source))
}

fn io_error(path: &Path, source: std::io::Error) -> RegistryError {
    RegistryError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn map_json_error(err: serde_json::Error) -> RegistryError {
    let message = err.to_string();
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return RegistryError::MissingField {
                field: rest[..end].to_string(),
                line: err.line(),
            };
        }
    }
    RegistryError::ParseError {
        line: err.line(),
        column: err.column(),
        message,
    }
}

/// Category grouping of the standard human-centric tools.
pub fn standard_category(name: &str) -> Option<Category> {
    static GROUPS: std::sync::OnceLock<HashMap<&'static str, Category>> = std::sync::OnceLock::new();
    let groups = GROUPS.get_or_init(|| {
        let perception = [
            "Body Pose Estimation",
            "Body Shape Measurement",
            "Hand Pose Estimation",
            "Face Reconstruction",
            "Human Segmentation",
            "HOI Detection",
            "Pose Description",
            "Image Caption",
            "Motion Capture",
        ];
        let reasoning = [
            "Selective Person Pose Detection",
            "Specific Person Shape Measurement",
            "Targeted Hand Pose Estimation",
            "Described Person Face Reconstruction",
            "Described Person Segmentation",
            "Selective Person Contact Estimation",
            "Visual Question Answering",
        ];
        let generation = [
            "Text-to-Pose Generation",
            "Speculative Pose Generation",
            "Text-to-Image Generation",
            "Text-based Pose Editing",
            "Remove Someone From The Photo",
            "Replace Someone From The Photo",
            "Instruct Image Using Text",
            "Text-to-Motion Generation",
            "Text-to-Video Generation",
            "Image-to-Video Generation",
        ];
        perception
            .iter()
            .map(|n| (*n, Category::Perception))
            .chain(reasoning.iter().map(|n| (*n, Category::Reasoning)))
            .chain(generation.iter().map(|n| (*n, Category::Generation)))
            .collect()
    });
    groups.get(name).copied()
}
