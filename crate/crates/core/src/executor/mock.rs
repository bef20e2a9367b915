//! Deterministic stand-ins for every catalog tool.
//!
//! Each call seeds a ChaCha8 generator with the configured seed XOR the
//! first 8 bytes of SHA-256 over the tool name and canonical arguments, so
//! outputs are pure functions of (tool, args, seed).

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ToolAdapter, ToolArgs, ToolError};
use crate::artifact::{ArtifactValue, ContactVector, PoseParams, ShapeParams, POSE_LEN, SHAPE_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolFamily {
    Pose,
    Shape,
    Contact,
    Text,
    Image,
    Motion,
}

impl ToolFamily {
    /// Artifact kind produced by tools of this family.
    pub fn output_kind(self) -> &'static str {
        match self {
            ToolFamily::Pose => "pose_params",
            ToolFamily::Shape => "shape_params",
            ToolFamily::Contact => "contact_vector",
            ToolFamily::Text => "text",
            ToolFamily::Image => "image_ref",
            ToolFamily::Motion => "motion_ref",
        }
    }
}

/// Output family of a built-in tool; unknown tools produce text.
pub fn family_of(tool: &str) -> ToolFamily {
    match tool {
        "Body Pose Estimation"
        | "Hand Pose Estimation"
        | "Selective Person Pose Detection"
        | "Targeted Hand Pose Estimation"
        | "Text-to-Pose Generation"
        | "Speculative Pose Generation"
        | "Text-based Pose Editing" => ToolFamily::Pose,
        "Body Shape Measurement" | "Specific Person Shape Measurement" => ToolFamily::Shape,
        "HOI Detection" | "Selective Person Contact Estimation" => ToolFamily::Contact,
        "Face Reconstruction"
        | "Human Segmentation"
        | "Described Person Face Reconstruction"
        | "Described Person Segmentation"
        | "Text-to-Image Generation"
        | "Remove Someone From The Photo"
        | "Replace Someone From The Photo"
        | "Instruct Image Using Text" => ToolFamily::Image,
        "Motion Capture" | "Text-to-Motion Generation" | "Text-to-Video Generation" | "Image-to-Video Generation" => {
            ToolFamily::Motion
        }
        _ => ToolFamily::Text,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    pub seed: u64,
    /// A call fails when the tool name or any canonical argument contains
    /// one of these substrings.
    #[serde(default)]
    pub fail_on: Vec<String>,
    /// Length of generated contact vectors; must match the active part map.
    pub contact_len: usize,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            fail_on: Vec::new(),
            contact_len: 24,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockAdapter {
    tool: String,
    family: ToolFamily,
    config: MockConfig,
}

/// `name=value` pairs joined by `;`, values in their inline text form or
/// JSON when they cannot be inlined.
pub(crate) fn canonical_args(args: &ToolArgs) -> String {
    args.iter()
        .map(|(name, value)| {
            let text = value
                .inline_text()
                .unwrap_or_else(|_| serde_json::to_string(value).expect("artifacts serialize"));
            format!("{name}={text}")
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn first_text(args: &ToolArgs) -> String {
    args.values().find_map(|v| v.as_ref_id().map(str::to_string)).unwrap_or_default()
}

impl MockAdapter {
    pub fn new(tool: &str, config: MockConfig) -> Self {
        Self {
            tool: tool.to_string(),
            family: family_of(tool),
            config,
        }
    }

    pub fn family(&self) -> ToolFamily {
        self.family
    }

    pub fn call(&self, args: &ToolArgs) -> Result<ArtifactValue, ToolError> {
        let canonical = canonical_args(args);
        if let Some(pattern) = self
            .config
            .fail_on
            .iter()
            .find(|p| self.tool.contains(p.as_str()) || canonical.contains(p.as_str()))
        {
            return Err(ToolError::ScriptedFailure(format!("{} matched {pattern:?}", self.tool)));
        }
        let digest = Sha256::digest(format!("{}\n{canonical}", self.tool).as_bytes());
        let mut prefix = [0u8; 8];
        prefix.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ u64::from_le_bytes(prefix));
        let tag = &hex::encode(digest)[..16];

        Ok(match self.family {
            ToolFamily::Pose => {
                let values = (0..POSE_LEN).map(|_| rng.gen_range(-0.5..0.5)).collect();
                ArtifactValue::PoseParams(PoseParams::new(values).expect("finite values"))
            }
            ToolFamily::Shape => {
                let values = (0..SHAPE_LEN).map(|_| rng.gen_range(-1.5..1.5)).collect();
                ArtifactValue::ShapeParams(ShapeParams::new(values).expect("finite values"))
            }
            ToolFamily::Contact => {
                let bits = (0..self.config.contact_len).map(|_| rng.gen_bool(0.2)).collect();
                ArtifactValue::ContactVector(ContactVector::new(bits))
            }
            ToolFamily::Text => ArtifactValue::Text(self.text_output(args)),
            ToolFamily::Image => ArtifactValue::ImageRef(format!("gen-{tag}.png")),
            ToolFamily::Motion => ArtifactValue::MotionRef(format!("motion-{tag}.mp4")),
        })
    }

    fn text_output(&self, args: &ToolArgs) -> String {
        let subject = first_text(args);
        match self.tool.as_str() {
            "Image Caption" => format!("a person in {subject}"),
            "Pose Description" => format!("The person in {subject} stands upright with both arms relaxed."),
            "Visual Question Answering" => {
                let question = args.get("question").and_then(ArtifactValue::as_ref_id).unwrap_or_default();
                format!("Looking at the image, the answer to \"{question}\" is yes.")
            }
            _ => format!("{} output for {}", self.tool, canonical_args(args)),
        }
    }
}

#[async_trait]
impl ToolAdapter for MockAdapter {
    fn tool_name(&self) -> &str {
        &self.tool
    }

    async fn invoke(&self, args: &ToolArgs) -> Result<ArtifactValue, ToolError> {
        self.call(args)
    }
}
