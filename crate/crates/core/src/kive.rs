//! Keyframe-guided interactive editing: conditional-input assembly, chaining
//! of long videos into overlapping clips, and the iterative-edit cost model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{
    apply_mask_frame, save_frames, save_masks, Frame, FrameSequence, Mask, MaskSequence, ModelError,
};

/// Frames per clip of the video editor.
pub const DEFAULT_CLIP_LENGTH: usize = 49;

#[derive(Debug, thiserror::Error)]
pub enum KiveError {
    #[error("keyframe is {found:?}, video is {expected:?}")]
    ResolutionMismatch { expected: (u32, u32), found: (u32, u32) },
    #[error("{frames} frames but {masks} masks")]
    LengthMismatch { frames: usize, masks: usize },
    #[error("number of attempts must be at least 1")]
    NonPositiveAttempts,
    #[error("clip length must be at least 2, got {0}")]
    InvalidClipLength(usize),
    #[error("video has no frames")]
    EmptyVideo,
    #[error("cost constants must be positive and finite")]
    InvalidCostModel,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Conditional input: the keyframe unmasked at slot 0, masked frames after
/// it, and an all-zero first mask.
#[derive(Debug, Clone, PartialEq)]
pub struct KiveConditional {
    pub frames: FrameSequence,
    pub masks: MaskSequence,
    pub caption: String,
}

/// Builds the conditional from a source clip, its masks and a keyframe (the
/// source's own first frame at training time, an edited one at inference).
pub fn assemble_kive_conditional(
    source: &FrameSequence,
    masks: &MaskSequence,
    keyframe: &Frame,
    caption: &str,
) -> Result<KiveConditional, KiveError> {
    if source.len() != masks.len() {
        return Err(KiveError::LengthMismatch {
            frames: source.len(),
            masks: masks.len(),
        });
    }
    if keyframe.dimensions() != source.resolution() {
        return Err(KiveError::ResolutionMismatch {
            expected: source.resolution(),
            found: keyframe.dimensions(),
        });
    }
    masks.check_pairs_with(source)?;
    let (w, h) = source.resolution();
    let mut frames = Vec::with_capacity(source.len());
    let mut out_masks = Vec::with_capacity(source.len());
    frames.push(keyframe.clone());
    out_masks.push(Mask::new(w, h));
    for (f, m) in source.frames().iter().zip(masks.masks()).skip(1) {
        frames.push(apply_mask_frame(f, m));
        out_masks.push(m.clone());
    }
    Ok(KiveConditional {
        frames: source.with_frames(frames)?,
        masks: MaskSequence::new(out_masks)?,
        caption: caption.to_string(),
    })
}

/// Saves frames and masks of a conditional into one directory.
pub fn write_kive_conditional(dir: &Path, cond: &KiveConditional) -> Result<(), KiveError> {
    save_frames(dir, &cond.frames)?;
    save_masks(dir, &cond.masks)?;
    Ok(())
}

/// Inclusive clip boundaries; consecutive clips share one frame, whose edit
/// in clip i becomes the keyframe of clip i+1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipChain {
    pub clip_length: usize,
    pub clips: Vec<(usize, usize)>,
}

pub fn chain_long_video(total_frames: usize, clip_length: usize) -> Result<ClipChain, KiveError> {
    if total_frames == 0 {
        return Err(KiveError::EmptyVideo);
    }
    if clip_length < 2 {
        return Err(KiveError::InvalidClipLength(clip_length));
    }
    let last = total_frames - 1;
    let mut clips = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + clip_length - 1).min(last);
        clips.push((start, end));
        if end == last {
            break;
        }
        start = end;
    }
    Ok(ClipChain { clip_length, clips })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditMode {
    /// Re-edit the whole clip on every attempt.
    Direct,
    /// Iterate on the keyframe, then propagate once.
    Kive,
}

impl std::str::FromStr for EditMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(EditMode::Direct),
            "kive" => Ok(EditMode::Kive),
            other => Err(format!("unknown edit mode {other:?}")),
        }
    }
}

/// Compute per edit in PFLOPs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c_im: f64,
    pub c_vid: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { c_im: 1.5, c_vid: 17.1 }
    }
}

impl CostModel {
    pub fn new(c_im: f64, c_vid: f64) -> Result<Self, KiveError> {
        let ok = |c: f64| c.is_finite() && c > 0.0;
        if !(ok(c_im) && ok(c_vid)) {
            return Err(KiveError::InvalidCostModel);
        }
        Ok(Self { c_im, c_vid })
    }
}

/// Total cost of `n_attempts` edits: N·c_vid directly, N·c_im + c_vid with
/// keyframe guidance.
pub fn editing_cost(n_attempts: u32, mode: EditMode, cm: &CostModel) -> Result<f64, KiveError> {
    if n_attempts == 0 {
        return Err(KiveError::NonPositiveAttempts);
    }
    let n = f64::from(n_attempts);
    Ok(match mode {
        EditMode::Direct => n * cm.c_vid,
        EditMode::Kive => n * cm.c_im + cm.c_vid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Fps, Rect};
    use image::Rgb;
    use proptest::prelude::*;

    fn clip(n: usize) -> (FrameSequence, MaskSequence) {
        let frames = (0..n).map(|i| Frame::from_pixel(6, 4, Rgb([i as u8 + 1, 50, 60]))).collect();
        let rect = Rect {
            x0: 1,
            y0: 1,
            x1: 4,
            y1: 3,
        };
        (
            FrameSequence::new(frames, Fps::integer(10).unwrap(), "c").unwrap(),
            MaskSequence::new(vec![Mask::from_rect(6, 4, rect); n]).unwrap(),
        )
    }

    #[test]
    fn training_mode_assembly() {
        let (src, masks) = clip(3);
        let c = assemble_kive_conditional(&src, &masks, &src.frames()[0], "y").unwrap();
        assert_eq!(c.frames.frames()[0], src.frames()[0]);
        assert!(c.masks.masks()[0].is_empty());
        assert_eq!(c.masks.masks()[1..], masks.masks()[1..]);
        assert_eq!(c.frames.frames()[2].get_pixel(2, 2).0, [0, 0, 0]);
        assert_eq!(c.frames.frames()[2].get_pixel(0, 0).0, [3, 50, 60]);
        let again = assemble_kive_conditional(&c.frames, &c.masks, &src.frames()[0], "y").unwrap();
        assert_eq!(again.frames.frames()[0], c.frames.frames()[0]);
        assert_eq!(again.masks, c.masks);
    }

    #[test]
    fn empty_masks_keep_source() {
        let (src, _) = clip(4);
        let empty = MaskSequence::new(vec![Mask::new(6, 4); 4]).unwrap();
        let key = Frame::from_pixel(6, 4, Rgb([200, 0, 0]));
        let c = assemble_kive_conditional(&src, &empty, &key, "y").unwrap();
        assert_eq!(c.frames.frames()[0], key);
        assert_eq!(c.frames.frames()[1..], src.frames()[1..]);
    }

    #[test]
    fn assembly_errors() {
        let (src, masks) = clip(3);
        assert!(matches!(
            assemble_kive_conditional(&src, &masks, &Frame::new(5, 4), "y"),
            Err(KiveError::ResolutionMismatch { .. })
        ));
        let (_, short) = clip(2);
        assert!(matches!(
            assemble_kive_conditional(&src, &short, &src.frames()[0], "y"),
            Err(KiveError::LengthMismatch { frames: 3, masks: 2 })
        ));
    }

    #[test]
    fn chain_examples() {
        let c = |n| chain_long_video(n, DEFAULT_CLIP_LENGTH).unwrap().clips;
        assert_eq!(c(145), [(0, 48), (48, 96), (96, 144)]);
        assert_eq!(c(49), [(0, 48)]);
        assert_eq!(c(50), [(0, 48), (48, 49)]);
        assert_eq!(c(1), [(0, 0)]);
        assert!(chain_long_video(0, 49).is_err());
        assert!(chain_long_video(10, 1).is_err());
    }

    #[test]
    fn cost_examples() {
        let cm = CostModel::default();
        assert_eq!(editing_cost(1, EditMode::Direct, &cm).unwrap(), 17.1);
        assert!((editing_cost(1, EditMode::Kive, &cm).unwrap() - 18.6).abs() < 1e-12);
        assert!(matches!(
            editing_cost(0, EditMode::Kive, &cm),
            Err(KiveError::NonPositiveAttempts)
        ));
        assert!(CostModel::new(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn chains_cover_with_single_overlaps(total in 1usize..2000, len in 2usize..100) {
            let chain = chain_long_video(total, len).unwrap();
            prop_assert_eq!(chain.clips[0].0, 0);
            prop_assert_eq!(chain.clips.last().unwrap().1, total - 1);
            for w in chain.clips.windows(2) {
                prop_assert_eq!(w[0].1, w[1].0);
            }
            for &(s, e) in &chain.clips {
                prop_assert!(e - s < len);
            }
        }

        #[test]
        fn kive_is_cheaper_from_two_attempts(n in 2u32..10_000) {
            let cm = CostModel::default();
            let k = editing_cost(n, EditMode::Kive, &cm).unwrap();
            let d = editing_cost(n, EditMode::Direct, &cm).unwrap();
            prop_assert!(k < d);
        }
    }
}
