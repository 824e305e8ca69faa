//! Backend wire protocol: one JSON request per line, one JSON response per
//! line (or one per HTTP POST body).
//!
//! ```text
//! -> {"id":7,"method":"segment","params":{"frame":{...},"box":[x0,y0,x1,y1]}}
//! <- {"id":7,"result":{"mask":{"width":W,"height":H,"counts":[...]}}}
//! <- {"id":7,"error":{"message":"..."}}
//! ```
//!
//! Images travel as base64 raw RGB. Masks travel run-length encoded
//! (row-major, alternating unset/set runs, starting with an unset run that
//! may be 0), or as base64 8-bit gray which the client binarizes at 128.
//! Flow fields are written to the sidecar path given in the request.

use std::path::PathBuf;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Detection, PerceptionBackend};
use crate::model::{Frame, Mask, Rect};

/// Threshold for gray-encoded masks.
pub const MASK_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireImage {
    pub width: u32,
    pub height: u32,
    pub rgb: String,
}

impl WireImage {
    pub fn encode(frame: &Frame) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            rgb: B64.encode(frame.as_raw()),
        }
    }

    pub fn decode(&self) -> Result<Frame, String> {
        let raw = B64.decode(&self.rgb).map_err(|e| format!("image base64: {e}"))?;
        Frame::from_raw(self.width, self.height, raw)
            .ok_or_else(|| format!("image buffer does not match {}x{}", self.width, self.height))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMask {
    pub width: u32,
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gray: Option<String>,
}

impl WireMask {
    pub fn encode(mask: &Mask) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for &b in mask.as_slice() {
            if b == current {
                run += 1;
            } else {
                counts.push(run);
                current = b;
                run = 1;
            }
        }
        counts.push(run);
        Self {
            width: mask.width(),
            height: mask.height(),
            counts: Some(counts),
            gray: None,
        }
    }

    pub fn decode(&self) -> Result<Mask, String> {
        let n = self.width as u64 * self.height as u64;
        match (&self.counts, &self.gray) {
            (Some(counts), None) => {
                let total: u64 = counts.iter().sum();
                if total != n {
                    return Err(format!("run lengths sum to {total}, expected {n}"));
                }
                let mut bits = Vec::with_capacity(n as usize);
                for (i, &c) in counts.iter().enumerate() {
                    bits.extend(std::iter::repeat_n(i % 2 == 1, c as usize));
                }
                let w = self.width as usize;
                Ok(Mask::from_fn(self.width, self.height, |x, y| {
                    bits[y as usize * w + x as usize]
                }))
            }
            (None, Some(gray)) => {
                let raw = B64.decode(gray).map_err(|e| format!("mask base64: {e}"))?;
                let img = image::GrayImage::from_raw(self.width, self.height, raw)
                    .ok_or_else(|| format!("mask buffer does not match {}x{}", self.width, self.height))?;
                Ok(Mask::from_gray_threshold(&img, MASK_THRESHOLD))
            }
            _ => Err("mask needs exactly one of `counts` or `gray`".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: [i64; 4],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "params", rename_all = "snake_case")]
pub enum Call {
    Ping,
    Tag {
        frame: WireImage,
    },
    Detect {
        frame: WireImage,
        label: String,
    },
    Segment {
        frame: WireImage,
        #[serde(rename = "box")]
        bbox: [u32; 4],
    },
    Propagate {
        frames: Vec<WireImage>,
        mask: WireMask,
    },
    Caption {
        frames: Vec<WireImage>,
        tag: String,
        prompt: String,
    },
    Flow {
        frame_a: WireImage,
        frame_b: WireImage,
        output: PathBuf,
    },
    Score {
        frame: WireImage,
        caption: String,
    },
    Embed {
        frame: WireImage,
    },
}

impl Call {
    pub fn method(&self) -> &'static str {
        match self {
            Call::Ping => "ping",
            Call::Tag { .. } => "tag",
            Call::Detect { .. } => "detect",
            Call::Segment { .. } => "segment",
            Call::Propagate { .. } => "propagate",
            Call::Caption { .. } => "caption",
            Call::Flow { .. } => "flow",
            Call::Score { .. } => "score",
            Call::Embed { .. } => "embed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub call: Call,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

impl Response {
    pub fn ok(id: u64, result: Value) -> Self {
        Self {
            id: Some(id),
            result: Some(result),
            error: None,
        }
    }

    pub fn err(id: Option<u64>, message: impl Into<String>) -> Self {
        Self {
            id,
            result: None,
            error: Some(WireError {
                message: message.into(),
            }),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PingResult {
    pub status: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TagResult {
    pub labels: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectResult {
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentResult {
    pub mask: WireMask,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PropagateResult {
    pub masks: Vec<WireMask>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CaptionResult {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FlowResult {
    pub flow_path: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreResult {
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResult {
    pub embedding: Vec<f32>,
}

fn to_value<T: Serialize>(v: T) -> Result<Value, String> {
    serde_json::to_value(v).map_err(|e| e.to_string())
}

fn decode_all(frames: &[WireImage]) -> Result<Vec<Frame>, String> {
    frames.iter().map(WireImage::decode).collect()
}

fn serve_call(backend: &dyn PerceptionBackend, call: &Call) -> Result<Value, String> {
    match call {
        Call::Ping => to_value(PingResult {
            status: "ok".into(),
        }),
        Call::Tag { frame } => to_value(TagResult {
            labels: backend.tag(&frame.decode()?)?,
        }),
        Call::Detect { frame, label } => {
            let detections = backend
                .detect(&frame.decode()?, label)?
                .into_iter()
                .map(|d: Detection| WireDetection {
                    label: d.label,
                    bbox: [
                        i64::from(d.bbox.x0),
                        i64::from(d.bbox.y0),
                        i64::from(d.bbox.x1),
                        i64::from(d.bbox.y1),
                    ],
                    score: d.score,
                })
                .collect();
            to_value(DetectResult { detections })
        }
        Call::Segment { frame, bbox } => {
            let [x0, y0, x1, y1] = *bbox;
            let mask = backend.segment(&frame.decode()?, Rect { x0, y0, x1, y1 })?;
            to_value(SegmentResult {
                mask: WireMask::encode(&mask),
            })
        }
        Call::Propagate { frames, mask } => {
            let masks = backend.propagate(&decode_all(frames)?, &mask.decode()?)?;
            to_value(PropagateResult {
                masks: masks.iter().map(WireMask::encode).collect(),
            })
        }
        Call::Caption {
            frames,
            tag,
            prompt,
        } => to_value(CaptionResult {
            text: backend.caption(&decode_all(frames)?, tag, prompt)?,
        }),
        Call::Flow {
            frame_a,
            frame_b,
            output,
        } => {
            let field = backend.flow(&frame_a.decode()?, &frame_b.decode()?)?;
            field.write_sidecar(output).map_err(|e| e.to_string())?;
            to_value(FlowResult {
                flow_path: output.clone(),
            })
        }
        Call::Score { frame, caption } => to_value(ScoreResult {
            score: backend.score(&frame.decode()?, caption)?,
        }),
        Call::Embed { frame } => to_value(EmbedResult {
            embedding: backend.embed(&frame.decode()?)?,
        }),
    }
}

/// Runs one request against a backend, turning failures into error responses.
pub fn dispatch(backend: &dyn PerceptionBackend, request: &Request) -> Response {
    match serve_call(backend, &request.call) {
        Ok(v) => Response::ok(request.id, v),
        Err(e) => Response::err(Some(request.id), e),
    }
}

/// Handles one raw request line (server side).
pub fn dispatch_line(backend: &dyn PerceptionBackend, line: &str) -> Response {
    match serde_json::from_str::<Request>(line) {
        Ok(req) => dispatch(backend, &req),
        Err(e) => {
            let id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(Value::as_u64));
            Response::err(id, format!("malformed request: {e}"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rle_layout() {
        let mut m = Mask::new(4, 2);
        m.set(0, 0, true);
        m.set(1, 0, true);
        m.set(3, 1, true);
        let w = WireMask::encode(&m);
        assert_eq!(w.counts.as_deref(), Some(&[0, 2, 5, 1][..]));
        assert_eq!(w.decode().unwrap(), m);
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"{"width":4,"height":2,"counts":[0,2,5,1]}"#);
    }

    #[test]
    fn bad_masks_rejected() {
        let short = WireMask {
            width: 2,
            height: 2,
            counts: Some(vec![1, 2]),
            gray: None,
        };
        assert!(short.decode().is_err());
        let both = WireMask {
            gray: Some(String::new()),
            ..WireMask::encode(&Mask::new(2, 2))
        };
        assert!(both.decode().is_err());
    }

    #[test]
    fn gray_masks_binarize_at_threshold() {
        let raw = vec![0u8, 127, 128, 255];
        let w = WireMask {
            width: 2,
            height: 2,
            counts: None,
            gray: Some(B64.encode(raw)),
        };
        let m = w.decode().unwrap();
        assert_eq!(m.as_slice(), &[false, false, true, true]);
    }

    #[test]
    fn request_envelope_shape() {
        let req = Request {
            id: 3,
            call: Call::Ping,
        };
        let s = serde_json::to_string(&req).unwrap();
        assert_eq!(s, r#"{"id":3,"method":"ping"}"#);
        assert_eq!(serde_json::from_str::<Request>(&s).unwrap(), req);
        let seg: Request = serde_json::from_str(
            r#"{"id":1,"method":"segment","params":{"frame":{"width":1,"height":1,"rgb":"AAAA"},"box":[0,0,1,1]}}"#,
        )
        .unwrap();
        assert_eq!(seg.call.method(), "segment");
    }

    proptest! {
        #[test]
        fn rle_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..200), w in 1u32..20) {
            let h = (bits.len() as u32).div_ceil(w);
            let m = Mask::from_fn(w, h, |x, y| bits.get((y * w + x) as usize).copied().unwrap_or(false));
            prop_assert_eq!(WireMask::encode(&m).decode().unwrap(), m);
        }
    }
}
