//! JSON schema for ground truth and detection files.
//!
//! ```json
//! {
//!   "images": [{"id": 1, "width": 800, "height": 600, "file_name": "a.png"}],
//!   "classes": [{"id": 0, "name": "fish"}],
//!   "annotations": [{"image_id": 1, "class_id": 0, "box": [10, 20, 110, 80]}]
//! }
//! ```
//!
//! Detection files carry `{"detections": [...]}` with the same record shape
//! plus `"confidence"`. Boxes are `[x_min, y_min, x_max, y_max]` unless the
//! reader is told the file uses `[x, y, width, height]`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates with strictly positive area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let ok = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite())
            && x_min < x_max
            && y_min < y_max;
        if !ok {
            return Err(Error::InvalidBox([x_min, y_min, x_max, y_max]));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x, y, x + w, y + h)
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub width: u32,
    pub height: u32,
    pub file_name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub id: u32,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: u64,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub class_id: u32,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub confidence: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub images: Vec<ImageInfo>,
    #[serde(default)]
    pub classes: Vec<ClassInfo>,
    pub annotations: Vec<Annotation>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
}

/// Box convention used in an input file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoxFormat {
    #[default]
    Xyxy,
    Xywh,
}

impl FromStr for BoxFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xyxy" => Ok(BoxFormat::Xyxy),
            "xywh" => Ok(BoxFormat::Xywh),
            other => Err(Error::Schema(format!("unknown box format `{other}`"))),
        }
    }
}

impl fmt::Display for BoxFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxFormat::Xyxy => "xyxy",
            BoxFormat::Xywh => "xywh",
        })
    }
}

// Raw records keep boxes as plain arrays so invalid boxes are reported with
// their record index.
#[derive(Deserialize)]
struct RawRecord {
    image_id: u64,
    class_id: u32,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    confidence: Option<f64>,
}

#[derive(Deserialize)]
struct RawGroundTruth {
    images: Vec<ImageInfo>,
    #[serde(default)]
    classes: Vec<ClassInfo>,
    annotations: Vec<RawRecord>,
}

#[derive(Deserialize)]
struct RawDetections {
    detections: Vec<RawRecord>,
}

fn convert_box(raw: [f64; 4], format: BoxFormat, what: &str, index: usize) -> Result<BoundingBox> {
    let made = match format {
        BoxFormat::Xyxy => BoundingBox::try_from(raw),
        BoxFormat::Xywh => BoundingBox::from_xywh(raw[0], raw[1], raw[2], raw[3]),
    };
    made.map_err(|_| Error::Schema(format!("{what} #{index}: invalid box {raw:?} ({format})")))
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Schema(format!("line {} column {}: {e}", e.line(), e.column()))
}

impl GroundTruth {
    pub fn from_json(text: &str, format: BoxFormat) -> Result<Self> {
        let raw: RawGroundTruth = serde_json::from_str(text).map_err(json_error)?;
        let mut image_ids = HashSet::new();
        for img in &raw.images {
            if !image_ids.insert(img.id) {
                return Err(Error::Schema(format!("duplicate image id {}", img.id)));
            }
        }
        let mut class_ids = HashSet::new();
        for c in &raw.classes {
            if !class_ids.insert(c.id) {
                return Err(Error::Schema(format!("duplicate class id {}", c.id)));
            }
        }
        let mut annotations = Vec::with_capacity(raw.annotations.len());
        for (i, r) in raw.annotations.into_iter().enumerate() {
            if !image_ids.contains(&r.image_id) {
                return Err(Error::Schema(format!(
                    "annotation #{i}: unknown image id {}",
                    r.image_id
                )));
            }
            if !class_ids.is_empty() && !class_ids.contains(&r.class_id) {
                return Err(Error::Schema(format!(
                    "annotation #{i}: unknown class id {}",
                    r.class_id
                )));
            }
            annotations.push(Annotation {
                image_id: r.image_id,
                class_id: r.class_id,
                bbox: convert_box(r.bbox, format, "annotation", i)?,
            });
        }
        Ok(Self {
            images: raw.images,
            classes: raw.classes,
            annotations,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    pub fn image(&self, id: u64) -> Option<&ImageInfo> {
        self.images.iter().find(|i| i.id == id)
    }
}

impl DetectionSet {
    /// Parses a detection file and checks every record against `gt`.
    pub fn from_json(text: &str, format: BoxFormat, gt: &GroundTruth) -> Result<Self> {
        let raw: RawDetections = serde_json::from_str(text).map_err(json_error)?;
        let image_ids: HashSet<u64> = gt.images.iter().map(|i| i.id).collect();
        let class_ids: HashSet<u32> = gt.classes.iter().map(|c| c.id).collect();
        let mut detections = Vec::with_capacity(raw.detections.len());
        for (i, r) in raw.detections.into_iter().enumerate() {
            if !image_ids.contains(&r.image_id) {
                return Err(Error::Schema(format!(
                    "detection #{i}: unknown image id {}",
                    r.image_id
                )));
            }
            if !class_ids.is_empty() && !class_ids.contains(&r.class_id) {
                return Err(Error::Schema(format!(
                    "detection #{i}: unknown class id {}",
                    r.class_id
                )));
            }
            let confidence = r
                .confidence
                .ok_or_else(|| Error::Schema(format!("detection #{i}: missing confidence")))?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(Error::Schema(format!(
                    "detection #{i}: confidence {confidence} outside [0, 1]"
                )));
            }
            detections.push(Detection {
                image_id: r.image_id,
                class_id: r.class_id,
                bbox: convert_box(r.bbox, format, "detection", i)?,
                confidence,
            });
        }
        Ok(Self { detections })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("detections serialize")
    }
}
