//! Pooled, validated client access to the perception roles.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crossbeam::channel::{self, Receiver, Sender};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::prompt::{parse_caption_triplet, render_caption_prompt, CaptionTriplet};
use super::transport::{HttpSession, InProcessSession, Session, SubprocessSession};
use super::wire::{
    CaptionResult, Call, DetectResult, EmbedResult, FlowResult, PingResult, PropagateResult,
    Request, ScoreResult, SegmentResult, TagResult, WireImage, WireMask,
};
use super::{Detection, MockBackend, PerceptionBackend, PerceptionError, Role};
use crate::flow::{FlowError, FlowEstimator, FlowField};
use crate::model::{Frame, Mask, Rect};

/// `VIVID_FORGE_BACKEND_<ROLE>` overrides a role's endpoint.
pub const ENV_BACKEND_PREFIX: &str = "VIVID_FORGE_BACKEND_";
/// `VIVID_FORGE_TRANSPORT_<ROLE>` overrides a role's transport.
pub const ENV_TRANSPORT_PREFIX: &str = "VIVID_FORGE_TRANSPORT_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Subprocess,
    Http,
    /// The built-in deterministic mock, served in process.
    Mock,
}

impl std::str::FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "subprocess" => Ok(Transport::Subprocess),
            "http" => Ok(Transport::Http),
            "mock" => Ok(Transport::Mock),
            other => Err(format!("unknown transport {other:?}")),
        }
    }
}

fn default_timeout() -> f64 {
    60.0
}

fn default_sessions() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub transport: Transport,
    /// Shell command line (subprocess) or URL (http). Unused for mock.
    #[serde(default)]
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_sessions")]
    pub sessions: usize,
}

impl BackendDescriptor {
    pub fn mock() -> Self {
        Self {
            transport: Transport::Mock,
            endpoint: String::new(),
            timeout_secs: default_timeout(),
            sessions: default_sessions(),
        }
    }

    fn validate(&self, role: Role) -> Result<(), PerceptionError> {
        if self.sessions == 0 {
            return Err(PerceptionError::Config(format!("{role}: sessions must be at least 1")));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(PerceptionError::Config(format!("{role}: timeout must be positive")));
        }
        if self.transport != Transport::Mock && self.endpoint.trim().is_empty() {
            return Err(PerceptionError::Config(format!("{role}: endpoint is required")));
        }
        Ok(())
    }
}

/// Per-role backend table, usually loaded from TOML:
///
/// ```toml
/// [detector]
/// transport = "http"
/// endpoint = "http://127.0.0.1:9000/"
/// timeout_secs = 30
/// sessions = 4
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BackendsConfig {
    pub roles: BTreeMap<Role, BackendDescriptor>,
}

impl BackendsConfig {
    pub fn all_mock() -> Self {
        Self {
            roles: Role::ALL.into_iter().map(|r| (r, BackendDescriptor::mock())).collect(),
        }
    }

    /// Parses a TOML table of roles. Roles left out fall back to the mock.
    pub fn from_toml_str(text: &str) -> Result<Self, PerceptionError> {
        let raw: BTreeMap<String, BackendDescriptor> =
            toml::from_str(text).map_err(|e| PerceptionError::Config(e.to_string()))?;
        let mut cfg = Self::all_mock();
        for (name, desc) in raw {
            let role: Role = name.parse().map_err(PerceptionError::Config)?;
            cfg.roles.insert(role, desc);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PerceptionError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Applies `VIVID_FORGE_BACKEND_<ROLE>` / `VIVID_FORGE_TRANSPORT_<ROLE>`
    /// overrides. An endpoint override on a mock role without a transport
    /// override switches it to subprocess.
    pub fn with_overrides<I, K, V>(mut self, vars: I) -> Result<Self, PerceptionError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let vars: BTreeMap<String, String> = vars
            .into_iter()
            .map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string()))
            .collect();
        for role in Role::ALL {
            let key = role.as_str().to_uppercase();
            let desc = self.roles.entry(role).or_insert_with(BackendDescriptor::mock);
            let transport = vars.get(&format!("{ENV_TRANSPORT_PREFIX}{key}"));
            if let Some(t) = transport {
                desc.transport = t.parse().map_err(PerceptionError::Config)?;
            }
            if let Some(endpoint) = vars.get(&format!("{ENV_BACKEND_PREFIX}{key}")) {
                desc.endpoint = endpoint.clone();
                if transport.is_none() && desc.transport == Transport::Mock {
                    desc.transport = Transport::Subprocess;
                }
            }
        }
        Ok(self)
    }

    pub fn with_env_overrides(self) -> Result<Self, PerceptionError> {
        self.with_overrides(std::env::vars())
    }
}

/// Post-filter applied to detector output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionLimits {
    pub min_score: f64,
    pub max_per_frame: usize,
}

impl Default for DetectionLimits {
    fn default() -> Self {
        Self {
            min_score: 0.35,
            max_per_frame: 8,
        }
    }
}

type Slot = Option<Box<dyn Session>>;

struct Pool {
    role: Role,
    descriptor: BackendDescriptor,
    backend: Option<Arc<dyn PerceptionBackend>>,
    give: Sender<Slot>,
    take: Receiver<Slot>,
}

impl Pool {
    fn new(role: Role, descriptor: BackendDescriptor, backend: Option<Arc<dyn PerceptionBackend>>) -> Self {
        let (give, take) = channel::bounded(descriptor.sessions);
        for _ in 0..descriptor.sessions {
            give.send(None).expect("capacity reserved");
        }
        Self {
            role,
            descriptor,
            backend,
            give,
            take,
        }
    }

    fn connect(&self) -> Result<Box<dyn Session>, PerceptionError> {
        if let Some(backend) = &self.backend {
            return Ok(Box::new(InProcessSession {
                backend: backend.clone(),
            }));
        }
        Ok(match self.descriptor.transport {
            Transport::Mock => Box::new(InProcessSession {
                backend: Arc::new(MockBackend::default()),
            }),
            Transport::Subprocess => Box::new(SubprocessSession::spawn(self.role, &self.descriptor.endpoint)?),
            Transport::Http => Box::new(HttpSession::new(self.role, &self.descriptor.endpoint)?),
        })
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.descriptor.timeout_secs)
    }

    fn call(&self, request: &Request) -> Result<serde_json::Value, PerceptionError> {
        let slot = self.take.recv().expect("pool sender lives in self");
        let mut session = match slot {
            Some(s) => s,
            None => match self.connect() {
                Ok(s) => s,
                Err(e) => {
                    let _ = self.give.send(None);
                    return Err(e);
                }
            },
        };
        let outcome = session.call(request, self.timeout());
        let keep = outcome.is_ok();
        let _ = self.give.send(keep.then_some(session));
        let response = outcome?;
        if response.id != Some(request.id) {
            return Err(PerceptionError::ProtocolError(format!(
                "reply id {:?} does not match request id {}",
                response.id, request.id
            )));
        }
        match (response.result, response.error) {
            (_, Some(err)) => Err(PerceptionError::Backend {
                role: self.role,
                message: err.message,
            }),
            (Some(v), None) => Ok(v),
            (None, None) => Err(PerceptionError::ProtocolError("reply has neither result nor error".into())),
        }
    }
}

fn decode<T: DeserializeOwned>(method: &str, v: serde_json::Value) -> Result<T, PerceptionError> {
    serde_json::from_value(v).map_err(|e| PerceptionError::ProtocolError(format!("{method} result: {e}")))
}

fn invalid(msg: impl Into<String>) -> PerceptionError {
    PerceptionError::ValidationFailure(msg.into())
}

fn check_mask(mask: Mask, frame: &Frame) -> Result<Mask, PerceptionError> {
    if mask.dimensions() != frame.dimensions() {
        return Err(invalid(format!(
            "mask is {:?}, frame is {:?}",
            mask.dimensions(),
            frame.dimensions()
        )));
    }
    Ok(mask)
}

/// Thread-safe entry point to all roles. Each role has its own pool of
/// sessions; a session is connected lazily and dropped after any failure.
pub struct Gateway {
    pools: BTreeMap<Role, Pool>,
    limits: DetectionLimits,
    next_id: AtomicU64,
    scratch: PathBuf,
}

impl Gateway {
    pub fn new(config: &BackendsConfig) -> Result<Self, PerceptionError> {
        let mut pools = BTreeMap::new();
        for (role, desc) in &config.roles {
            desc.validate(*role)?;
            pools.insert(*role, Pool::new(*role, desc.clone(), None));
        }
        Ok(Self::from_pools(pools))
    }

    pub fn mock() -> Self {
        Self::new(&BackendsConfig::all_mock()).expect("mock config is valid")
    }

    /// Serves every role from one in-process backend.
    pub fn in_process(backend: Arc<dyn PerceptionBackend>, sessions: usize) -> Self {
        let desc = BackendDescriptor {
            sessions: sessions.max(1),
            ..BackendDescriptor::mock()
        };
        let pools = Role::ALL
            .into_iter()
            .map(|r| (r, Pool::new(r, desc.clone(), Some(backend.clone()))))
            .collect();
        Self::from_pools(pools)
    }

    fn from_pools(pools: BTreeMap<Role, Pool>) -> Self {
        Self {
            pools,
            limits: DetectionLimits::default(),
            next_id: AtomicU64::new(1),
            scratch: std::env::temp_dir(),
        }
    }

    pub fn with_limits(mut self, limits: DetectionLimits) -> Self {
        self.limits = limits;
        self
    }

    /// Directory where flow sidecars are exchanged with backends.
    pub fn with_scratch_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.scratch = dir.into();
        self
    }

    pub fn limits(&self) -> DetectionLimits {
        self.limits
    }

    fn call(&self, role: Role, call: Call) -> Result<serde_json::Value, PerceptionError> {
        let pool = self.pools.get(&role).ok_or(PerceptionError::Unavailable(role))?;
        let request = Request {
            id: self.next_id.fetch_add(1, Ordering::Relaxed),
            call,
        };
        pool.call(&request)
    }

    pub fn ping(&self, role: Role) -> Result<(), PerceptionError> {
        let r: PingResult = decode("ping", self.call(role, Call::Ping)?)?;
        if r.status != "ok" {
            return Err(invalid(format!("{role} reports status {:?}", r.status)));
        }
        Ok(())
    }

    pub fn tag_frame(&self, frame: &Frame) -> Result<Vec<String>, PerceptionError> {
        let v = self.call(
            Role::Tagger,
            Call::Tag {
                frame: WireImage::encode(frame),
            },
        )?;
        Ok(decode::<TagResult>("tag", v)?.labels)
    }

    /// Detections for `label`, validated, thresholded and capped, best first.
    pub fn detect_label(&self, frame: &Frame, label: &str) -> Result<Vec<Detection>, PerceptionError> {
        let v = self.call(
            Role::Detector,
            Call::Detect {
                frame: WireImage::encode(frame),
                label: label.to_string(),
            },
        )?;
        let (w, h) = (i64::from(frame.width()), i64::from(frame.height()));
        let mut out = Vec::new();
        for d in decode::<DetectResult>("detect", v)?.detections {
            let [x0, y0, x1, y1] = d.bbox;
            if !(0 <= x0 && x0 < x1 && x1 <= w && 0 <= y0 && y0 < y1 && y1 <= h) {
                return Err(invalid(format!("box {:?} outside {w}x{h} frame", d.bbox)));
            }
            if !(0.0..=1.0).contains(&d.score) {
                return Err(invalid(format!("detection score {} outside [0,1]", d.score)));
            }
            if d.score >= self.limits.min_score {
                out.push(Detection {
                    label: d.label,
                    bbox: Rect {
                        x0: x0 as u32,
                        y0: y0 as u32,
                        x1: x1 as u32,
                        y1: y1 as u32,
                    },
                    score: d.score,
                });
            }
        }
        out.sort_by(|a, b| b.score.total_cmp(&a.score));
        out.truncate(self.limits.max_per_frame);
        Ok(out)
    }

    pub fn segment_box(&self, frame: &Frame, bbox: Rect) -> Result<Mask, PerceptionError> {
        let v = self.call(
            Role::Segmenter,
            Call::Segment {
                frame: WireImage::encode(frame),
                bbox: [bbox.x0, bbox.y0, bbox.x1, bbox.y1],
            },
        )?;
        let mask = decode::<SegmentResult>("segment", v)?.mask.decode().map_err(invalid)?;
        check_mask(mask, frame)
    }

    /// Tracks `mask` from the first frame through the rest.
    pub fn propagate_mask(&self, frames: &[Frame], mask: &Mask) -> Result<Vec<Mask>, PerceptionError> {
        let v = self.call(
            Role::Segmenter,
            Call::Propagate {
                frames: frames.iter().map(WireImage::encode).collect(),
                mask: WireMask::encode(mask),
            },
        )?;
        let masks = decode::<PropagateResult>("propagate", v)?.masks;
        if masks.len() != frames.len() {
            return Err(invalid(format!(
                "propagate returned {} masks for {} frames",
                masks.len(),
                frames.len()
            )));
        }
        masks
            .iter()
            .zip(frames)
            .map(|(m, f)| check_mask(m.decode().map_err(invalid)?, f))
            .collect()
    }

    /// Renders the prompt for `tag`, asks the captioner and parses its three
    /// answers.
    pub fn caption_entity(&self, crops: &[Frame], tag: &str) -> Result<CaptionTriplet, PerceptionError> {
        let prompt = render_caption_prompt(tag)?;
        let v = self.call(
            Role::Captioner,
            Call::Caption {
                frames: crops.iter().map(WireImage::encode).collect(),
                tag: tag.to_string(),
                prompt,
            },
        )?;
        parse_caption_triplet(&decode::<CaptionResult>("caption", v)?.text, tag)
    }

    pub fn estimate_flow(&self, a: &Frame, b: &Frame) -> Result<FlowField, PerceptionError> {
        if a.dimensions() != b.dimensions() {
            return Err(invalid("flow frames differ in size"));
        }
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        let output = self
            .scratch
            .join(format!("vivid-forge-flow-{}-{n}.bin", std::process::id()));
        let v = self.call(
            Role::Flow,
            Call::Flow {
                frame_a: WireImage::encode(a),
                frame_b: WireImage::encode(b),
                output: output.clone(),
            },
        );
        let result = v.and_then(|v| decode::<FlowResult>("flow", v)).and_then(|r| {
            FlowField::read_sidecar(&r.flow_path).map_err(|e| invalid(format!("flow sidecar: {e}")))
        });
        let _ = std::fs::remove_file(&output);
        let field = result?;
        if field.dimensions() != a.dimensions() {
            return Err(invalid(format!(
                "flow is {:?}, frames are {:?}",
                field.dimensions(),
                a.dimensions()
            )));
        }
        Ok(field)
    }

    /// Caption/region similarity in [0,1] (raw, not scaled by 100).
    pub fn score_region(&self, crop: &Frame, caption: &str) -> Result<f64, PerceptionError> {
        let v = self.call(
            Role::Scorer,
            Call::Score {
                frame: WireImage::encode(crop),
                caption: caption.to_string(),
            },
        )?;
        let s = decode::<ScoreResult>("score", v)?.score;
        if !s.is_finite() {
            return Err(invalid("non-finite score"));
        }
        Ok(s)
    }

    pub fn embed_frame(&self, frame: &Frame) -> Result<Vec<f32>, PerceptionError> {
        let v = self.call(
            Role::Embedder,
            Call::Embed {
                frame: WireImage::encode(frame),
            },
        )?;
        let e = decode::<EmbedResult>("embed", v)?.embedding;
        if e.is_empty() || e.iter().any(|x| !x.is_finite()) || e.iter().all(|x| *x == 0.0) {
            return Err(invalid("embedding must be finite and non-zero"));
        }
        Ok(e)
    }
}

impl FlowEstimator for Gateway {
    fn estimate(&self, a: &Frame, b: &Frame) -> Result<FlowField, FlowError> {
        self.estimate_flow(a, b).map_err(|e| FlowError::Estimator(e.to_string()))
    }
}
