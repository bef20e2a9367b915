use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IntegrationError;
use crate::artifact::{PoseParams, ShapeParams, SHAPE_LEN};

pub const HEIGHT_LIMIT_M: f64 = 3.0;
pub const WEIGHT_LIMIT_KG: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementField {
    Height,
    Weight,
    Chest,
    Waist,
    Hip,
}

impl MeasurementField {
    pub const ALL: [MeasurementField; 5] = [
        MeasurementField::Height,
        MeasurementField::Weight,
        MeasurementField::Chest,
        MeasurementField::Waist,
        MeasurementField::Hip,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MeasurementField::Height => "height",
            MeasurementField::Weight => "weight",
            MeasurementField::Chest => "chest",
            MeasurementField::Waist => "waist",
            MeasurementField::Hip => "hip",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            MeasurementField::Weight => "kg",
            _ => "m",
        }
    }
}

/// Anthropometric measurements in meters and kilograms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chest: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waist: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hip: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityFlag {
    pub field: MeasurementField,
    pub value: f64,
    pub reason: String,
}

impl MeasurementSet {
    pub fn from_array(values: [f64; 5]) -> Self {
        Self {
            height: Some(values[0]),
            weight: Some(values[1]),
            chest: Some(values[2]),
            waist: Some(values[3]),
            hip: Some(values[4]),
        }
    }

    pub fn get(&self, field: MeasurementField) -> Option<f64> {
        match field {
            MeasurementField::Height => self.height,
            MeasurementField::Weight => self.weight,
            MeasurementField::Chest => self.chest,
            MeasurementField::Waist => self.waist,
            MeasurementField::Hip => self.hip,
        }
    }

    pub fn set(&mut self, field: MeasurementField, value: Option<f64>) {
        let slot = match field {
            MeasurementField::Height => &mut self.height,
            MeasurementField::Weight => &mut self.weight,
            MeasurementField::Chest => &mut self.chest,
            MeasurementField::Waist => &mut self.waist,
            MeasurementField::Hip => &mut self.hip,
        };
        *slot = value;
    }

    /// `"height: 1.75 m"` for a present field.
    pub fn render_field(&self, field: MeasurementField) -> Option<String> {
        self.get(field)
            .map(|v| format!("{}: {:.2} {}", field.label(), v, field.unit()))
    }

    /// Canonical sentence listing every present field.
    pub fn sentence(&self) -> String {
        let fields: Vec<String> = MeasurementField::ALL
            .iter()
            .filter_map(|&f| self.render_field(f))
            .collect();
        format!("Estimated measurements — {}", fields.join(", "))
    }

    /// Fields violating the plausibility bounds.
    pub fn check(&self) -> Vec<PlausibilityFlag> {
        let mut flags = Vec::new();
        for field in MeasurementField::ALL {
            let Some(value) = self.get(field) else { continue };
            let reason = if !value.is_finite() || value <= 0.0 {
                Some("must be positive".to_string())
            } else if field == MeasurementField::Height && value >= HEIGHT_LIMIT_M {
                Some(format!("must be below {HEIGHT_LIMIT_M:.1} m"))
            } else if field == MeasurementField::Weight && value >= WEIGHT_LIMIT_KG {
                Some(format!("must be below {WEIGHT_LIMIT_KG:.0} kg"))
            } else {
                None
            };
            if let Some(reason) = reason {
                flags.push(PlausibilityFlag { field, value, reason });
            }
        }
        flags
    }
}

/// Affine shape-to-measurement model `m = A·β + b`.
///
/// File format: `{"A": [[f64; 10]; 5], "b": [f64; 5]}`, rows ordered
/// height, weight, chest, waist, hip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeModelFile", into = "ShapeModelFile")]
pub struct ShapeMeasurementModel {
    a: [[f64; SHAPE_LEN]; 5],
    b: [f64; 5],
}

#[derive(Serialize, Deserialize)]
struct ShapeModelFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TryFrom<ShapeModelFile> for ShapeMeasurementModel {
    type Error = IntegrationError;
    fn try_from(file: ShapeModelFile) -> Result<Self, Self::Error> {
        let bad = |m: String| IntegrationError::InvalidShapeModel(m);
        if file.a.len() != 5 || file.b.len() != 5 {
            return Err(bad(format!("A has {} rows and b {} entries, need 5", file.a.len(), file.b.len())));
        }
        let mut a = [[0.0; SHAPE_LEN]; 5];
        for (i, row) in file.a.iter().enumerate() {
            if row.len() != SHAPE_LEN {
                return Err(bad(format!("A row {i} has {} columns", row.len())));
            }
            a[i].copy_from_slice(row);
        }
        let mut b = [0.0; 5];
        b.copy_from_slice(&file.b);
        ShapeMeasurementModel::new(a, b)
    }
}

impl From<ShapeMeasurementModel> for ShapeModelFile {
    fn from(m: ShapeMeasurementModel) -> Self {
        Self {
            a: m.a.iter().map(|r| r.to_vec()).collect(),
            b: m.b.to_vec(),
        }
    }
}

impl ShapeMeasurementModel {
    pub fn new(a: [[f64; SHAPE_LEN]; 5], b: [f64; 5]) -> Result<Self, IntegrationError> {
        if a.iter().flatten().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(IntegrationError::InvalidShapeModel("non-finite coefficient".into()));
        }
        Ok(Self { a, b })
    }

    pub fn bundled() -> Self {
        serde_json::from_str(include_str!("../../fixtures/shape_model.json")).expect("bundled shape model")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IntegrationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| IntegrationError::InvalidShapeModel(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| IntegrationError::InvalidShapeModel(e.to_string()))
    }

    pub fn offset(&self) -> [f64; 5] {
        self.b
    }

    pub fn apply(&self, beta: &ShapeParams) -> [f64; 5] {
        let mut out = self.b;
        for (o, row) in out.iter_mut().zip(&self.a) {
            *o += row.iter().zip(beta.values()).map(|(a, x)| a * x).sum::<f64>();
        }
        out
    }
}

/// Result of converting shape coefficients into measurements. Implausible
/// values are kept and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReading {
    pub measurements: MeasurementSet,
    pub sentence: String,
    pub flags: Vec<PlausibilityFlag>,
}

pub fn transform_shape(beta: &ShapeParams, model: &ShapeMeasurementModel) -> ShapeReading {
    reading(MeasurementSet::from_array(model.apply(beta)))
}

pub fn reading(measurements: MeasurementSet) -> ShapeReading {
    ShapeReading {
        sentence: measurements.sentence(),
        flags: measurements.check(),
        measurements,
    }
}

/// Deterministic opaque image id for a pose; true mesh rendering is external.
pub fn render_pose_placeholder(pose: &PoseParams) -> String {
    let bytes: Vec<u8> = pose.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    format!("pose-render-{}.png", &crate::sha256_hex(bytes)[..16])
}
