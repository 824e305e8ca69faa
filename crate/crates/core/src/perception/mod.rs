//! Uniform access to the pluggable perception models (tagger, detector,
//! segmenter, captioner, flow estimator, plus the region scorer and frame
//! embedder used by evaluation), the label vocabularies and the caption
//! prompt contract.

mod gateway;
mod mock;
mod prompt;
mod transport;
mod vocab;
pub mod wire;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::flow::FlowField;
use crate::model::{Frame, Mask, Rect};

pub use gateway::{
    BackendDescriptor, BackendsConfig, DetectionLimits, Gateway, Transport, ENV_BACKEND_PREFIX,
    ENV_TRANSPORT_PREFIX,
};
pub use mock::{MockBackend, MOCK_PALETTE, MOCK_TOLERANCE};
pub use prompt::{
    parse_caption_triplet, render_caption_prompt, CaptionTriplet, CAPTION_PREFIX,
    CAPTION_PROMPT_TEMPLATE, TAG_PLACEHOLDER,
};
pub use transport::{http_router, serve_lines, Session};
pub use vocab::{
    filter_labels, FilterMode, ForegroundStoplists, VocabularyConfig, ADJECTIVES,
    BACKGROUND_ALLOWLIST, COLORS, REPEATED_CHARACTER_DESCRIPTIONS, VERBS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Tagger,
    Detector,
    Segmenter,
    Captioner,
    Flow,
    Scorer,
    Embedder,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Tagger,
        Role::Detector,
        Role::Segmenter,
        Role::Captioner,
        Role::Flow,
        Role::Scorer,
        Role::Embedder,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Tagger => "tagger",
            Role::Detector => "detector",
            Role::Segmenter => "segmenter",
            Role::Captioner => "captioner",
            Role::Flow => "flow",
            Role::Scorer => "scorer",
            Role::Embedder => "embedder",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PerceptionError {
    #[error("{role} backend timed out after {after:?}")]
    BackendTimeout { role: Role, after: Duration },
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("response failed validation: {0}")]
    ValidationFailure(String),
    #[error("{role} backend reported: {message}")]
    Backend { role: Role, message: String },
    #[error("no backend configured for role {0}")]
    Unavailable(Role),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("tag must not be empty")]
    EmptyTag,
    #[error("expected 3 answers, found {found}")]
    WrongAnswerCount { found: usize },
    #[error("answer {index} does not start with the required prefix")]
    MissingPrefix { index: usize },
    #[error("answer {index} does not contain the tag")]
    MissingTag { index: usize },
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A labelled box in pixel coordinates (half-open).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub bbox: Rect,
    pub score: f64,
}

/// Server-side view of a perception model. Each method defaults to
/// "unsupported" so a backend only implements the roles it serves.
pub trait PerceptionBackend: Send + Sync {
    fn tag(&self, _frame: &Frame) -> Result<Vec<String>, String> {
        Err("method `tag` not supported".into())
    }

    fn detect(&self, _frame: &Frame, _label: &str) -> Result<Vec<Detection>, String> {
        Err("method `detect` not supported".into())
    }

    fn segment(&self, _frame: &Frame, _bbox: Rect) -> Result<Mask, String> {
        Err("method `segment` not supported".into())
    }

    fn propagate(&self, _frames: &[Frame], _mask: &Mask) -> Result<Vec<Mask>, String> {
        Err("method `propagate` not supported".into())
    }

    fn caption(&self, _crops: &[Frame], _tag: &str, _prompt: &str) -> Result<String, String> {
        Err("method `caption` not supported".into())
    }

    fn flow(&self, _a: &Frame, _b: &Frame) -> Result<FlowField, String> {
        Err("method `flow` not supported".into())
    }

    fn score(&self, _crop: &Frame, _caption: &str) -> Result<f64, String> {
        Err("method `score` not supported".into())
    }

    fn embed(&self, _frame: &Frame) -> Result<Vec<f32>, String> {
        Err("method `embed` not supported".into())
    }
}
