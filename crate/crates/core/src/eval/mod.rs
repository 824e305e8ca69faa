//! Automatic metrics: background preservation (BP), temporal consistency
//! (TC) and text alignment (TA), plus frame-rate downsampling and the
//! evaluation report.

mod report;

use crate::model::{Frame, FrameSequence, Mask, MaskSequence, ModelError};
use crate::perception::{Gateway, PerceptionError};

pub use report::{eval_report, EvalReport, Metrics, RecordMetrics, TaskSummary, BP_NORMALIZATION};

/// Side length of the builtin embedder's grayscale thumbnail.
pub const BUILTIN_EMBED_SIDE: u32 = 16;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no background pixels to compare")]
    NoBackgroundPixels,
    #[error("need at least 2 frames, found {found}")]
    TooFewFrames { found: usize },
    #[error("mask of frame {frame} is empty")]
    EmptyMask { frame: usize },
    #[error("downsampling factor must be at least 1")]
    InvalidFactor,
    #[error("embedding dimension changed from {expected} to {found}")]
    EmbeddingDimension { expected: usize, found: usize },
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Maps a frame to a fixed-length feature vector.
pub trait FrameEmbedder: Send + Sync {
    fn embed(&self, frame: &Frame) -> Result<Vec<f32>, EvalError>;
}

/// Similarity in [0,1] between an image region and a caption.
pub trait RegionScorer: Send + Sync {
    fn score(&self, crop: &Frame, caption: &str) -> Result<f64, EvalError>;
}

/// Flattened 16×16 grayscale thumbnail (area average), L2-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinEmbedder;

impl FrameEmbedder for BuiltinEmbedder {
    fn embed(&self, frame: &Frame) -> Result<Vec<f32>, EvalError> {
        Ok(builtin_embedding(frame))
    }
}

impl FrameEmbedder for Gateway {
    fn embed(&self, frame: &Frame) -> Result<Vec<f32>, EvalError> {
        Ok(self.embed_frame(frame)?)
    }
}

impl RegionScorer for Gateway {
    fn score(&self, crop: &Frame, caption: &str) -> Result<f64, EvalError> {
        Ok(self.score_region(crop, caption)?)
    }
}

/// An all-black frame has no direction; it maps to the uniform unit vector so
/// the output is never zero.
pub fn builtin_embedding(frame: &Frame) -> Vec<f32> {
    let side = BUILTIN_EMBED_SIDE as usize;
    let mut sums = vec![0.0f64; side * side];
    let mut counts = vec![0u32; side * side];
    let (w, h) = frame.dimensions();
    for (x, y, p) in frame.enumerate_pixels() {
        let cx = (u64::from(x) * u64::from(BUILTIN_EMBED_SIDE) / u64::from(w)) as usize;
        let cy = (u64::from(y) * u64::from(BUILTIN_EMBED_SIDE) / u64::from(h)) as usize;
        let [r, g, b] = p.0;
        let luma = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
        sums[cy * side + cx] += luma / 255.0;
        counts[cy * side + cx] += 1;
    }
    let mut v: Vec<f32> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| if n == 0 { 0.0 } else { (s / f64::from(n)) as f32 })
        .collect();
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 {
        let u = 1.0 / (v.len() as f32).sqrt();
        v.iter_mut().for_each(|x| *x = u);
    } else {
        v.iter_mut().for_each(|x| *x = (f64::from(*x) / norm) as f32);
    }
    v
}

/// Mean absolute difference over every channel of every non-mask pixel, in
/// 0..=255 units.
pub fn background_preservation(
    original: &FrameSequence,
    edited: &FrameSequence,
    masks: &MaskSequence,
) -> Result<f64, EvalError> {
    if original.len() != edited.len() || original.resolution() != edited.resolution() {
        return Err(EvalError::ShapeMismatch(format!(
            "original {} frames at {:?}, edited {} frames at {:?}",
            original.len(),
            original.resolution(),
            edited.len(),
            edited.resolution()
        )));
    }
    masks.check_pairs_with(original)?;
    let mut total = 0u64;
    let mut n = 0u64;
    for ((a, b), m) in original.frames().iter().zip(edited.frames()).zip(masks.masks()) {
        for ((pa, pb), &inside) in a.pixels().zip(b.pixels()).zip(m.as_slice()) {
            if inside {
                continue;
            }
            for c in 0..3 {
                total += u64::from(pa.0[c].abs_diff(pb.0[c]));
            }
            n += 3;
        }
    }
    if n == 0 {
        return Err(EvalError::NoBackgroundPixels);
    }
    Ok(total as f64 / n as f64)
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// 100 × mean cosine similarity of consecutive frame embeddings.
pub fn temporal_consistency(video: &FrameSequence, embedder: &dyn FrameEmbedder) -> Result<f64, EvalError> {
    if video.len() < 2 {
        return Err(EvalError::TooFewFrames { found: video.len() });
    }
    let mut embeddings = Vec::with_capacity(video.len());
    for f in video.frames() {
        let e = embedder.embed(f)?;
        if let Some(first) = embeddings.first().map(Vec::len) {
            if e.len() != first {
                return Err(EvalError::EmbeddingDimension {
                    expected: first,
                    found: e.len(),
                });
            }
        }
        embeddings.push(e);
    }
    // Identical frames score exactly 100 regardless of rounding in the cosine.
    let sum: f64 = video
        .frames()
        .windows(2)
        .zip(embeddings.windows(2))
        .map(|(f, e)| if f[0] == f[1] { 1.0 } else { cosine(&e[0], &e[1]) })
        .sum();
    Ok(100.0 * sum / (video.len() - 1) as f64)
}

/// 100 × mean per-frame score of the masked crop against `caption`.
pub fn text_alignment(
    edited: &FrameSequence,
    masks: &MaskSequence,
    caption: &str,
    scorer: &dyn RegionScorer,
) -> Result<f64, EvalError> {
    masks.check_pairs_with(edited)?;
    if let Some(frame) = masks.first_empty() {
        return Err(EvalError::EmptyMask { frame });
    }
    let mut sum = 0.0;
    for (f, m) in edited.frames().iter().zip(masks.masks()) {
        sum += scorer.score(&masked_crop(f, m), caption)?;
    }
    Ok(100.0 * sum / edited.len() as f64)
}

/// The mask's bounding box, with pixels outside the mask zeroed.
fn masked_crop(frame: &Frame, mask: &Mask) -> Frame {
    let bbox = mask.bbox().expect("checked non-empty");
    Frame::from_fn(bbox.width(), bbox.height(), |x, y| {
        let (sx, sy) = (bbox.x0 + x, bbox.y0 + y);
        if mask.get(sx, sy) {
            *frame.get_pixel(sx, sy)
        } else {
            image::Rgb([0, 0, 0])
        }
    })
}

fn kept_indices(len: usize, factor: usize) -> impl Iterator<Item = usize> {
    (0..len).step_by(factor)
}

/// Keeps frames 0, factor, 2·factor, … and divides the frame rate.
pub fn downsample_fps(video: &FrameSequence, factor: u32) -> Result<FrameSequence, EvalError> {
    if factor == 0 {
        return Err(EvalError::InvalidFactor);
    }
    let frames = kept_indices(video.len(), factor as usize)
        .map(|i| video.frames()[i].clone())
        .collect();
    Ok(video.with_frames(frames)?.with_fps(video.fps().divided_by(factor)))
}

/// Same index selection as [`downsample_fps`], for the paired masks.
pub fn downsample_masks(masks: &MaskSequence, factor: u32) -> Result<MaskSequence, EvalError> {
    if factor == 0 {
        return Err(EvalError::InvalidFactor);
    }
    let kept = kept_indices(masks.len(), factor as usize)
        .map(|i| masks.masks()[i].clone())
        .collect();
    Ok(MaskSequence::new(kept)?)
}
