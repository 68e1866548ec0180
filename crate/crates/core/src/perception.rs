//! Detection frames to spatial objects.
//!
//! Every detection is placed in one cell of a 2x3 image-space grid (top/bottom
//! rows, left/center/right columns), given a distance estimate and a priority
//! score that favours close obstacles in the walking corridor.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("invalid bounding box {0:?}: need 0 <= x_min < x_max <= 1 and 0 <= y_min < y_max <= 1")]
    InvalidBox([f64; 4]),
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("image dimensions must be positive, got {width}x{height}")]
    InvalidFrame { width: u32, height: u32 },
    #[error("bounding box has zero pixel height")]
    ZeroHeight,
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
}

/// Normalized image rectangle with the origin at the top-left corner.
///
/// Serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, PerceptionError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = [x_min, y_min, x_max, y_max].iter().all(|v| unit(*v))
            && x_min < x_max
            && y_min < y_max;
        if ok {
            Ok(Self { x_min, y_min, x_max, y_max })
        } else {
            Err(PerceptionError::InvalidBox([x_min, y_min, x_max, y_max]))
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn centroid(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = PerceptionError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub bbox: BBox,
    pub confidence: f64,
    /// Ground-truth range attached by the simulated camera. Never present in
    /// recorded logs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_distance_m: Option<f64>,
}

impl Detection {
    pub fn new(label: impl Into<String>, bbox: BBox, confidence: f64) -> Self {
        Self { label: label.into(), bbox, confidence, true_distance_m: None }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(PerceptionError::InvalidConfidence(self.confidence));
        }
        Ok(())
    }
}

/// One camera frame worth of detections. One line of a detection log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub frame_id: u64,
    pub timestamp_ms: u64,
    pub image_width_px: u32,
    pub image_height_px: u32,
    pub detections: Vec<Detection>,
}

impl DetectionFrame {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.image_width_px == 0 || self.image_height_px == 0 {
            return Err(PerceptionError::InvalidFrame {
                width: self.image_width_px,
                height: self.image_height_px,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Row {
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Left,
    Center,
    Right,
}

/// A cell of the 2x3 grid. Displays as `bottom-center`, `top-left`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct GridCell {
    pub row: Row,
    pub column: Column,
}

impl GridCell {
    pub const BOTTOM_CENTER: GridCell = GridCell { row: Row::Bottom, column: Column::Center };

    pub const ALL: [GridCell; 6] = [
        GridCell { row: Row::Top, column: Column::Left },
        GridCell { row: Row::Top, column: Column::Center },
        GridCell { row: Row::Top, column: Column::Right },
        GridCell { row: Row::Bottom, column: Column::Left },
        GridCell { row: Row::Bottom, column: Column::Center },
        GridCell { row: Row::Bottom, column: Column::Right },
    ];

    pub fn new(row: Row, column: Column) -> Self {
        Self { row, column }
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = match self.row {
            Row::Top => "top",
            Row::Bottom => "bottom",
        };
        let col = match self.column {
            Column::Left => "left",
            Column::Center => "center",
            Column::Right => "right",
        };
        write!(f, "{row}-{col}")
    }
}

impl FromStr for GridCell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GridCell::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| format!("unknown grid cell `{s}`"))
    }
}

impl From<GridCell> for String {
    fn from(c: GridCell) -> Self {
        c.to_string()
    }
}

impl TryFrom<String> for GridCell {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialObject {
    pub label: String,
    pub cell: GridCell,
    pub distance_m: Option<f64>,
    pub priority: f64,
    pub bbox: BBox,
    pub confidence: f64,
}

fn default_min_confidence() -> f64 {
    0.25
}

/// Pinhole parameters and per-class physical heights used for ranging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_length_px: f64,
    pub class_height_priors_m: BTreeMap<String, f64>,
    /// Detections below this confidence are dropped before mapping.
    #[serde(default = "default_min_confidence")]
    pub min_confidence: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(self.focal_length_px > 0.0) {
            return Err(PerceptionError::InvalidCamera(format!(
                "focal length {} must be positive",
                self.focal_length_px
            )));
        }
        if let Some((k, v)) = self.class_height_priors_m.iter().find(|(_, v)| !(**v > 0.0)) {
            return Err(PerceptionError::InvalidCamera(format!("prior for `{k}` is {v}, must be positive")));
        }
        Ok(())
    }

    /// 640x480 sensor with a 60 degree horizontal field of view and priors for
    /// the classes the simulator produces.
    pub fn default_640x480() -> Self {
        let focal = 320.0 / 30f64.to_radians().tan();
        let priors = [
            ("person", 1.7),
            ("chair", 0.9),
            ("table", 0.75),
            ("door", 2.0),
            ("box", 0.5),
            ("trash can", 0.8),
            ("plant", 1.0),
        ];
        Self {
            focal_length_px: focal,
            class_height_priors_m: priors.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            min_confidence: default_min_confidence(),
        }
    }
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::default_640x480()
    }
}

/// Grid cell of the box centroid. Intervals are half-open so a centroid on a
/// boundary goes to the lower-right neighbour (bottom row, center/right
/// column).
pub fn assign_cell(bbox: &BBox) -> GridCell {
    let (cx, cy) = bbox.centroid();
    let column = if cx < 1.0 / 3.0 {
        Column::Left
    } else if cx < 2.0 / 3.0 {
        Column::Center
    } else {
        Column::Right
    };
    let row = if cy < 0.5 { Row::Top } else { Row::Bottom };
    GridCell { row, column }
}

/// Pinhole range `focal * prior_height / bbox_height_px`; `None` when the
/// label has no height prior.
pub fn estimate_distance(
    det: &Detection,
    frame: &DetectionFrame,
    cam: &CameraModel,
) -> Result<Option<f64>, PerceptionError> {
    frame.validate()?;
    let Some(prior) = cam.class_height_priors_m.get(&det.label) else {
        return Ok(None);
    };
    let height_px = det.bbox.height() * f64::from(frame.image_height_px);
    if !(height_px > 0.0) {
        return Err(PerceptionError::ZeroHeight);
    }
    Ok(Some(cam.focal_length_px * prior / height_px))
}

pub const ROW_WEIGHT_BOTTOM: f64 = 2.0;
pub const ROW_WEIGHT_TOP: f64 = 1.0;
pub const COL_WEIGHT_CENTER: f64 = 1.5;
pub const COL_WEIGHT_SIDE: f64 = 1.0;
pub const MAX_DISTANCE_WEIGHT: f64 = 2.0;

pub fn score_priority(cell: GridCell, distance_m: Option<f64>) -> f64 {
    let row_w = match cell.row {
        Row::Bottom => ROW_WEIGHT_BOTTOM,
        Row::Top => ROW_WEIGHT_TOP,
    };
    let col_w = match cell.column {
        Column::Center => COL_WEIGHT_CENTER,
        Column::Left | Column::Right => COL_WEIGHT_SIDE,
    };
    let dist_w = distance_m.map_or(0.0, |d| (1.0 / d).min(MAX_DISTANCE_WEIGHT));
    row_w + col_w + dist_w
}

/// Total order used wherever spatial objects are ranked: priority descending,
/// then nearer first (unknown distance last), then label.
pub fn priority_order(
    a_priority: f64,
    a_distance: Option<f64>,
    a_label: &str,
    b_priority: f64,
    b_distance: Option<f64>,
    b_label: &str,
) -> Ordering {
    b_priority
        .total_cmp(&a_priority)
        .then_with(|| match (a_distance, b_distance) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then_with(|| a_label.cmp(b_label))
}

/// A detection that could not be mapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub frame_id: u64,
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedFrame {
    pub frame_id: u64,
    pub timestamp_ms: u64,
    pub objects: Vec<SpatialObject>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

/// Map every detection of a frame. Detections under the confidence floor are
/// dropped silently, invalid ones are skipped with a diagnostic. When the
/// detection carries a ground-truth range (simulation) it is used instead of
/// the pinhole estimate.
pub fn map_frame(frame: &DetectionFrame, cam: &CameraModel) -> Result<MappedFrame, PerceptionError> {
    frame.validate()?;
    let mut objects = Vec::with_capacity(frame.detections.len());
    let mut diagnostics = Vec::new();

    for (index, det) in frame.detections.iter().enumerate() {
        if let Err(e) = det.validate() {
            diagnostics.push(Diagnostic { frame_id: frame.frame_id, index, message: e.to_string() });
            continue;
        }
        if det.confidence < cam.min_confidence {
            continue;
        }
        let distance = match det.true_distance_m {
            Some(d) if d > 0.0 => Ok(Some(d)),
            _ => estimate_distance(det, frame, cam),
        };
        let distance_m = match distance {
            Ok(d) => d,
            Err(e) => {
                diagnostics.push(Diagnostic { frame_id: frame.frame_id, index, message: e.to_string() });
                continue;
            }
        };
        let cell = assign_cell(&det.bbox);
        objects.push(SpatialObject {
            label: det.label.clone(),
            cell,
            distance_m,
            priority: score_priority(cell, distance_m),
            bbox: det.bbox,
            confidence: det.confidence,
        });
    }

    objects.sort_by(|a, b| {
        priority_order(a.priority, a.distance_m, &a.label, b.priority, b.distance_m, &b.label)
    });

    Ok(MappedFrame { frame_id: frame.frame_id, timestamp_ms: frame.timestamp_ms, objects, diagnostics })
}
