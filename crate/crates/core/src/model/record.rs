use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{Fps, ModelError, Result};
use crate::geometry::AugmentationKind;

pub const SCHEMA_VERSION: &str = "vivid-forge/1";

/// Caption attached to every deletion sample.
pub const DELETION_CAPTION: &str =
    "Remove objects and generate areas that blend with the background.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    AdditionModification,
    Deletion,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::AdditionModification => "addition_modification",
            Task::Deletion => "deletion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionLength {
    Short,
    Medium,
    Long,
}

impl CaptionLength {
    pub const ALL: [CaptionLength; 3] = [Self::Short, Self::Medium, Self::Long];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Short => "short",
            Self::Medium => "medium",
            Self::Long => "long",
        }
    }
}

/// How a keyframe mask was carried through the clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    Tracked,
    Copied,
    Flowed,
}

impl Propagation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Tracked => "tracked",
            Self::Copied => "copied",
            Self::Flowed => "flowed",
        }
    }
}

/// One training sample `(frames, masks, masked frames, caption)` plus metadata.
///
/// Paths are stored as written; relative paths resolve against the
/// directory holding the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub task: Task,
    pub frames_ref: PathBuf,
    pub masks_ref: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masked_ref: Option<PathBuf>,
    pub caption: String,
    pub caption_length_class: CaptionLength,
    pub augmentation: AugmentationKind,
    pub propagation: Propagation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_label: Option<String>,
    pub fps: Fps,
    pub resolution: (u32, u32),
    #[serde(default)]
    pub provenance: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub kive: bool,
}

impl SampleRecord {
    pub fn validate(&self) -> Result<()> {
        let violation = |msg: String| Err(ModelError::SchemaViolation(msg));
        if self.id.is_empty() {
            return violation("empty id".into());
        }
        if self.caption.is_empty() {
            return violation(format!("record {}: empty caption", self.id));
        }
        if self.task == Task::Deletion && self.caption != DELETION_CAPTION {
            return violation(format!(
                "record {}: deletion caption must be the fixed deletion prompt",
                self.id
            ));
        }
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return violation(format!("record {}: zero resolution", self.id));
        }
        Ok(())
    }

    pub fn source_id(&self) -> Option<&str> {
        self.provenance.get("source_id").and_then(|v| v.as_str())
    }
}

/// A sample under evaluation, optionally paired with an edited video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(flatten)]
    pub sample: SampleRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited_ref: Option<PathBuf>,
}
