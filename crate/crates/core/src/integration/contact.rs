use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IntegrationError;
use crate::artifact::ContactVector;

/// Fixed body-part vocabulary; rendering follows this order.
pub const PART_VOCABULARY: [&str; 18] = [
    "right hand",
    "right upper leg",
    "left arm",
    "left leg",
    "left foot",
    "back",
    "left shoulder",
    "right shoulder",
    "right foot",
    "head",
    "right arm",
    "left hand",
    "right leg",
    "left forearm",
    "right forearm",
    "neck",
    "left upper leg",
    "hips",
];

pub const NO_CONTACT: &str = "No contact detected.";

/// Assignment of every mesh vertex to one body part.
///
/// File format: `{"V": int, "parts": [names], "assignment": [ints]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VertexPartMapFile", into = "VertexPartMapFile")]
pub struct VertexPartMap {
    parts: Vec<String>,
    assignment: Vec<usize>,
    /// Position of each entry of `parts` in the fixed vocabulary.
    vocab_rank: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct VertexPartMapFile {
    #[serde(rename = "V")]
    v: usize,
    parts: Vec<String>,
    assignment: Vec<usize>,
}

impl TryFrom<VertexPartMapFile> for VertexPartMap {
    type Error = IntegrationError;
    fn try_from(file: VertexPartMapFile) -> Result<Self, Self::Error> {
        if file.assignment.len() != file.v {
            return Err(IntegrationError::InvalidPartMap(format!(
                "V = {} but {} assignments",
                file.v,
                file.assignment.len()
            )));
        }
        VertexPartMap::new(file.parts, file.assignment)
    }
}

impl From<VertexPartMap> for VertexPartMapFile {
    fn from(map: VertexPartMap) -> Self {
        Self {
            v: map.assignment.len(),
            parts: map.parts,
            assignment: map.assignment,
        }
    }
}

impl VertexPartMap {
    pub fn new(parts: Vec<String>, assignment: Vec<usize>) -> Result<Self, IntegrationError> {
        if assignment.is_empty() {
            return Err(IntegrationError::InvalidPartMap("no vertices".into()));
        }
        let mut vocab_rank = Vec::with_capacity(parts.len());
        for part in &parts {
            let rank = PART_VOCABULARY
                .iter()
                .position(|p| p == part)
                .ok_or_else(|| IntegrationError::InvalidPartMap(format!("unknown part {part:?}")))?;
            if vocab_rank.contains(&rank) {
                return Err(IntegrationError::InvalidPartMap(format!("duplicate part {part:?}")));
            }
            vocab_rank.push(rank);
        }
        if let Some((v, &p)) = assignment.iter().enumerate().find(|(_, &p)| p >= parts.len()) {
            return Err(IntegrationError::InvalidPartMap(format!(
                "vertex {v} assigned to part index {p}, only {} parts",
                parts.len()
            )));
        }
        Ok(Self {
            parts,
            assignment,
            vocab_rank,
        })
    }

    /// Desk-scale default: 24 vertices, vertex v on vocabulary part v mod 18.
    pub fn toy() -> Self {
        let parts = PART_VOCABULARY.iter().map(|p| p.to_string()).collect();
        let assignment = (0..24).map(|v| v % PART_VOCABULARY.len()).collect();
        Self::new(parts, assignment).expect("toy map is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntegrationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| IntegrationError::InvalidPartMap(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| IntegrationError::InvalidPartMap(e.to_string()))
    }

    pub fn vertex_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn parts(&self) -> &[String] {
        &self.parts
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Contacted parts in vocabulary order.
    pub fn contacted_parts(&self, contact: &ContactVector) -> Result<Vec<&str>, IntegrationError> {
        if contact.len() != self.vertex_count() {
            return Err(IntegrationError::LengthMismatch {
                expected: self.vertex_count(),
                actual: contact.len(),
            });
        }
        let mut hit = vec![false; self.parts.len()];
        for (bit, &part) in contact.bits().iter().zip(&self.assignment) {
            if *bit {
                hit[part] = true;
            }
        }
        let mut ranked: Vec<(usize, &str)> = hit
            .iter()
            .enumerate()
            .filter(|(_, &h)| h)
            .map(|(i, _)| (self.vocab_rank[i], self.parts[i].as_str()))
            .collect();
        ranked.sort_unstable();
        Ok(ranked.into_iter().map(|(_, p)| p).collect())
    }
}

/// Renders contacted body parts as a sentence.
pub fn transform_contact(contact: &ContactVector, map: &VertexPartMap) -> Result<String, IntegrationError> {
    let parts = map.contacted_parts(contact)?;
    if parts.is_empty() {
        Ok(NO_CONTACT.to_string())
    } else {
        Ok(format!("Contact detected on: {}", parts.join(", ")))
    }
}
