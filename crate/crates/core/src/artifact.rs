//! Tool output values and the on-disk store that image and motion ids
//! resolve against.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::integration::MeasurementSet;

pub const POSE_LEN: usize = 72;
pub const SHAPE_LEN: usize = 10;

/// Axis-angle body pose, 24 joints x 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PoseParams(Vec<f64>);

/// Body shape coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ShapeParams(Vec<f64>);

macro_rules! fixed_vector {
    ($ty:ident, $len:expr) => {
        impl $ty {
            pub fn new(values: Vec<f64>) -> Result<Self, String> {
                if values.len() != $len {
                    return Err(format!(
                        "{} needs {} values, got {}",
                        stringify!($ty),
                        $len,
                        values.len()
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(format!("{} has a non-finite value", stringify!($ty)));
                }
                Ok(Self(values))
            }

            pub fn zeros() -> Self {
                Self(vec![0.0; $len])
            }

            pub fn values(&self) -> &[f64] {
                &self.0
            }
        }

        impl TryFrom<Vec<f64>> for $ty {
            type Error = String;
            fn try_from(values: Vec<f64>) -> Result<Self, String> {
                Self::new(values)
            }
        }

        impl From<$ty> for Vec<f64> {
            fn from(v: $ty) -> Vec<f64> {
                v.0
            }
        }
    };
}

fixed_vector!(PoseParams, POSE_LEN);
fixed_vector!(ShapeParams, SHAPE_LEN);

/// Per-vertex binary contact labels, serialized as 0/1 integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct ContactVector(Vec<bool>);

impl ContactVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_indices(len: usize, contacts: &[usize]) -> Self {
        let mut bits = vec![false; len];
        for &i in contacts {
            bits[i] = true;
        }
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

impl TryFrom<Vec<u8>> for ContactVector {
    type Error = String;
    fn try_from(values: Vec<u8>) -> Result<Self, String> {
        values
            .into_iter()
            .map(|v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(format!("contact label {other} is not 0 or 1")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl From<ContactVector> for Vec<u8> {
    fn from(v: ContactVector) -> Vec<u8> {
        v.0.into_iter().map(u8::from).collect()
    }
}

/// A tool output. Serialized as `{"kind": ..., "value": ...}`, which is also
/// the remote tool wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ArtifactValue {
    Text(String),
    ImageRef(String),
    PoseParams(PoseParams),
    ShapeParams(ShapeParams),
    ContactVector(ContactVector),
    MeasurementSet(MeasurementSet),
    MotionRef(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} artifacts cannot be inlined into text")]
pub struct NotInlineable {
    pub kind: &'static str,
}

impl ArtifactValue {
    pub fn kind(&self) -> &'static str {
        match self {
            ArtifactValue::Text(_) => "text",
            ArtifactValue::ImageRef(_) => "image_ref",
            ArtifactValue::PoseParams(_) => "pose_params",
            ArtifactValue::ShapeParams(_) => "shape_params",
            ArtifactValue::ContactVector(_) => "contact_vector",
            ArtifactValue::MeasurementSet(_) => "measurement_set",
            ArtifactValue::MotionRef(_) => "motion_ref",
        }
    }

    /// Textual form used when the artifact is substituted into a larger
    /// string argument. Vector artifacts must flow whole.
    pub fn inline_text(&self) -> Result<String, NotInlineable> {
        match self {
            ArtifactValue::Text(t) => Ok(t.clone()),
            ArtifactValue::ImageRef(id) | ArtifactValue::MotionRef(id) => Ok(id.clone()),
            ArtifactValue::MeasurementSet(m) => Ok(m.sentence()),
            other => Err(NotInlineable { kind: other.kind() }),
        }
    }

    /// The file-like id carried by text or reference artifacts.
    pub fn as_ref_id(&self) -> Option<&str> {
        match self {
            ArtifactValue::Text(s) | ArtifactValue::ImageRef(s) | ArtifactValue::MotionRef(s) => Some(s),
            _ => None,
        }
    }
}

/// An artifact together with the tool that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub source_tool: String,
    #[serde(flatten)]
    pub value: ArtifactValue,
}

/// Directory of uploaded and generated binary artifacts, addressed by id.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid artifact id {0:?}")]
    InvalidId(String),
    #[error("artifact store i/o: {0}")]
    Io(#[from] std::io::Error),
}

// 1x1 grey PNG used for placeholder renders.
const PLACEHOLDER_PNG: &[u8] = &[
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00, 0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00,
    0x0a, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x68, 0x00, 0x00, 0x00, 0x82, 0x00, 0x81, 0x4c, 0x8d, 0xa7,
    0x43, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
];

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stores bytes under a content-derived id `img-<hash><ext>`.
    pub fn put(&self, bytes: &[u8], extension: &str) -> Result<String, StoreError> {
        let ext = extension.trim_start_matches('.');
        if !ext.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(StoreError::InvalidId(ext.to_string()));
        }
        let hash = crate::sha256_hex(bytes);
        let id = if ext.is_empty() {
            format!("img-{}", &hash[..16])
        } else {
            format!("img-{}.{ext}", &hash[..16])
        };
        std::fs::write(self.root.join(&id), bytes)?;
        Ok(id)
    }

    pub fn resolve(&self, id: &str) -> Result<Option<PathBuf>, StoreError> {
        if !is_safe_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        let path = self.root.join(id);
        Ok(path.is_file().then_some(path))
    }

    /// Makes `id` resolvable to the placeholder image.
    pub fn materialize_placeholder(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !is_safe_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        let path = self.root.join(id);
        if !path.exists() {
            std::fs::write(&path, PLACEHOLDER_PNG)?;
        }
        Ok(path)
    }
}

fn is_safe_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}
