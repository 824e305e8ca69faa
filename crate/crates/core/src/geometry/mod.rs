//! Mask augmentation operators (expand, hull, box and their compositions),
//! area filtering, entity cropping and mask pasting.

mod hull;
mod morphology;
mod paste;

use std::fmt;
use std::str::FromStr;

use image::Rgb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{FrameSequence, Mask, MaskSequence, ModelError, Rect};

pub use hull::{hull_vertices, point_in_hull, rasterize_hull};
pub use morphology::{close_disk, dilate_disk, erode_disk, squared_distance_transform};
pub use paste::{
    paste_mask, PasteTransform, Placement, PASTE_MAX_ATTEMPTS, PASTE_MIN_INSIDE, PASTE_SCALE_STEP,
};

/// Padding around the entity's union bounding box when cropping for captions.
pub const CROP_PADDING: u32 = 8;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("mask for frame {frame} is empty")]
    EmptyMask { frame: usize },
    #[error("no feasible placement after {attempts} attempts")]
    NoFeasiblePlacement { attempts: u32 },
    #[error("invalid area filter: {0}")]
    InvalidAreaFilter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationKind {
    None,
    Expand,
    Hull,
    Box,
    HullExpand,
    BoxExpand,
}

impl AugmentationKind {
    /// `none` followed by the five derived kinds.
    pub const ALL: [AugmentationKind; 6] = [
        Self::None,
        Self::Expand,
        Self::Hull,
        Self::Box,
        Self::HullExpand,
        Self::BoxExpand,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Expand => "expand",
            Self::Hull => "hull",
            Self::Box => "box",
            Self::HullExpand => "hull_expand",
            Self::BoxExpand => "box_expand",
        }
    }

    fn expands(&self) -> bool {
        matches!(self, Self::Expand | Self::HullExpand | Self::BoxExpand)
    }
}

impl fmt::Display for AugmentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugmentationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown augmentation kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaFilterConfig {
    pub min_fraction: f64,
    pub max_fraction: f64,
}

impl Default for AreaFilterConfig {
    fn default() -> Self {
        Self {
            min_fraction: 0.005,
            max_fraction: 0.60,
        }
    }
}

impl AreaFilterConfig {
    pub fn new(min_fraction: f64, max_fraction: f64) -> Result<Self, GeometryError> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(in_unit(min_fraction) && in_unit(max_fraction) && min_fraction < max_fraction) {
            return Err(GeometryError::InvalidAreaFilter(format!(
                "need 0 < min ({min_fraction}) < max ({max_fraction}) < 1"
            )));
        }
        Ok(Self {
            min_fraction,
            max_fraction,
        })
    }

    pub fn accepts(&self, mask: &Mask) -> bool {
        let f = mask.fraction();
        f >= self.min_fraction && f <= self.max_fraction
    }
}

/// Accepts a sequence only if every frame's mask coverage is in range.
pub fn area_filter(masks: &MaskSequence, cfg: &AreaFilterConfig) -> bool {
    masks.masks().iter().all(|m| cfg.accepts(m))
}

/// Dilation radius for `expand`: `max(2, round(u * 0.2 * sqrt(area)))` with
/// `u ~ U[0.5, 1.5]` drawn from `seed`.
pub fn expand_radius(area: u64, seed: u64) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: f64 = rng.random_range(0.5..=1.5);
    let r = (u * 0.2 * (area as f64).sqrt()).round() as u32;
    r.max(2)
}

/// Enlarges the mask by a seeded, area-proportional disk dilation.
pub fn expand(mask: &Mask, seed: u64) -> Result<Mask, GeometryError> {
    if mask.is_empty() {
        return Err(GeometryError::EmptyMask { frame: 0 });
    }
    Ok(dilate_disk(mask, expand_radius(mask.count(), seed)))
}

pub fn hull(mask: &Mask) -> Result<Mask, GeometryError> {
    if mask.is_empty() {
        return Err(GeometryError::EmptyMask { frame: 0 });
    }
    Ok(rasterize_hull(mask))
}

/// Filled axis-aligned bounding rectangle of the set pixels.
pub fn bounding_box(mask: &Mask) -> Result<Mask, GeometryError> {
    let rect = mask.bbox().ok_or(GeometryError::EmptyMask { frame: 0 })?;
    Ok(Mask::from_rect(mask.width(), mask.height(), rect))
}

/// Result of [`augment`]; `radius` is the shared dilation radius when the
/// kind expands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmented {
    pub masks: MaskSequence,
    pub radius: Option<u32>,
}

/// Applies an augmentation frame by frame. Compositions run hull/box first,
/// then expand; one radius (derived from the first frame) is shared by the
/// whole sequence so the dilation does not flicker.
pub fn augment(
    masks: &MaskSequence,
    kind: AugmentationKind,
    seed: u64,
) -> Result<Augmented, GeometryError> {
    if kind == AugmentationKind::None {
        return Ok(Augmented {
            masks: masks.clone(),
            radius: None,
        });
    }
    if let Some(frame) = masks.first_empty() {
        return Err(GeometryError::EmptyMask { frame });
    }
    let shaped: Vec<Mask> = masks
        .masks()
        .iter()
        .map(|m| match kind {
            AugmentationKind::Hull | AugmentationKind::HullExpand => rasterize_hull(m),
            AugmentationKind::Box | AugmentationKind::BoxExpand => {
                Mask::from_rect(m.width(), m.height(), m.bbox().expect("non-empty"))
            }
            _ => m.clone(),
        })
        .collect();
    if !kind.expands() {
        return Ok(Augmented {
            masks: MaskSequence::new(shaped)?,
            radius: None,
        });
    }
    let r = expand_radius(shaped[0].count(), seed);
    let expanded = shaped.iter().map(|m| dilate_disk(m, r)).collect();
    Ok(Augmented {
        masks: MaskSequence::new(expanded)?,
        radius: Some(r),
    })
}

/// Union bounding box of all masks, padded and clamped to the frame.
pub fn crop_window(masks: &MaskSequence, pad: u32) -> Result<Rect, GeometryError> {
    let mut union: Option<Rect> = None;
    for (frame, m) in masks.masks().iter().enumerate() {
        let b = m.bbox().ok_or(GeometryError::EmptyMask { frame })?;
        union = Some(union.map_or(b, |u| u.union(&b)));
    }
    let (w, h) = masks.resolution();
    Ok(union.expect("non-empty sequence").padded(pad, w, h))
}

/// Isolates the entity: zeroes everything outside the mask and crops every
/// frame to one shared padded window.
pub fn crop_entity(
    frames: &FrameSequence,
    masks: &MaskSequence,
) -> Result<FrameSequence, GeometryError> {
    masks.check_pairs_with(frames)?;
    let win = crop_window(masks, CROP_PADDING)?;
    let out = frames
        .frames()
        .iter()
        .zip(masks.masks())
        .map(|(f, m)| {
            image::RgbImage::from_fn(win.width(), win.height(), |x, y| {
                let (sx, sy) = (x + win.x0, y + win.y0);
                if m.get(sx, sy) {
                    *f.get_pixel(sx, sy)
                } else {
                    Rgb([0, 0, 0])
                }
            })
        })
        .collect();
    Ok(frames.with_frames(out)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Fps;
    use image::RgbImage;

    fn rect_mask(w: u32, h: u32, x0: u32, y0: u32, x1: u32, y1: u32) -> Mask {
        Mask::from_rect(w, h, Rect { x0, y0, x1, y1 })
    }

    fn l_shape(w: u32, h: u32) -> Mask {
        Mask::from_fn(w, h, |x, y| {
            ((10..14).contains(&x) && (10..30).contains(&y))
                || ((10..30).contains(&x) && (26..30).contains(&y))
        })
    }

    #[test]
    fn box_example() {
        let mut m = Mask::new(10, 10);
        // (row, col) = (2, 3) and (5, 7)
        m.set(3, 2, true);
        m.set(7, 5, true);
        let b = bounding_box(&m).unwrap();
        assert_eq!(b.count(), 20);
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(b.get(x, y), (2..=5).contains(&y) && (3..=7).contains(&x));
            }
        }
    }

    #[test]
    fn convex_sets_are_fixed_points() {
        let r = rect_mask(20, 20, 3, 4, 11, 9);
        assert_eq!(hull(&r).unwrap(), r);
        assert_eq!(bounding_box(&r).unwrap(), r);
    }

    #[test]
    fn empty_masks_rejected() {
        let e = Mask::new(4, 4);
        assert!(matches!(expand(&e, 1), Err(GeometryError::EmptyMask { .. })));
        assert!(matches!(hull(&e), Err(GeometryError::EmptyMask { .. })));
        assert!(matches!(
            bounding_box(&e),
            Err(GeometryError::EmptyMask { .. })
        ));
        let seq = MaskSequence::new(vec![rect_mask(4, 4, 0, 0, 2, 2), e]).unwrap();
        assert!(matches!(
            augment(&seq, AugmentationKind::Hull, 0),
            Err(GeometryError::EmptyMask { frame: 1 })
        ));
    }

    #[test]
    fn radius_law_bounds() {
        for seed in 0..50 {
            let r = expand_radius(100, seed);
            // 0.2 * sqrt(100) = 2, u in [0.5, 1.5] -> round(1..3) floored at 2
            assert!((2..=3).contains(&r), "r = {r}");
            let big = expand_radius(10_000, seed);
            assert!((10..=30).contains(&big), "r = {big}");
        }
        assert_eq!(expand_radius(1, 9), 2);
    }

    #[test]
    fn expand_is_deterministic_and_grows() {
        let sq = rect_mask(100, 100, 45, 45, 55, 55);
        let a = expand(&sq, 7).unwrap();
        assert_eq!(a, expand(&sq, 7).unwrap());
        assert!(sq.is_subset_of(&a));
        assert!(a.count() > sq.count());
    }

    #[test]
    fn augment_none_is_identity() {
        let seq = MaskSequence::new(vec![l_shape(40, 40)]).unwrap();
        assert_eq!(augment(&seq, AugmentationKind::None, 3).unwrap().masks, seq);
    }

    #[test]
    fn augment_shares_radius_across_frames() {
        let frames: Vec<Mask> = (0..4)
            .map(|i| rect_mask(64, 64, 10 + i, 10, 20 + i * 3, 20))
            .collect();
        let seq = MaskSequence::new(frames).unwrap();
        let out = augment(&seq, AugmentationKind::Expand, 11).unwrap();
        let r = out.radius.unwrap();
        assert_eq!(r, expand_radius(seq.first().count(), 11));
        for (src, dst) in seq.masks().iter().zip(out.masks.masks()) {
            assert_eq!(*dst, dilate_disk(src, r));
        }
    }

    #[test]
    fn six_distinct_kinds_on_non_convex_source() {
        let seq = MaskSequence::new(vec![l_shape(48, 48)]).unwrap();
        let outs: Vec<_> = AugmentationKind::ALL
            .iter()
            .map(|&k| augment(&seq, k, 5).unwrap().masks)
            .collect();
        for i in 0..outs.len() {
            for j in (i + 1)..outs.len() {
                assert_ne!(outs[i], outs[j], "{:?} == {:?}", AugmentationKind::ALL[i], AugmentationKind::ALL[j]);
            }
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AugmentationKind::ALL {
            assert_eq!(k.as_str().parse::<AugmentationKind>().unwrap(), k);
            assert_eq!(
                serde_json::to_string(&k).unwrap(),
                format!("\"{}\"", k.as_str())
            );
        }
    }

    #[test]
    fn area_filter_examples() {
        let cfg = AreaFilterConfig {
            min_fraction: 0.005,
            max_fraction: 0.60,
        };
        let eighty = rect_mask(10, 10, 0, 0, 10, 8);
        assert!(!area_filter(&MaskSequence::new(vec![eighty]).unwrap(), &cfg));
        let ten = rect_mask(10, 10, 0, 0, 10, 1);
        assert!(area_filter(&MaskSequence::new(vec![ten.clone()]).unwrap(), &cfg));
        let mut tiny = Mask::new(100, 10);
        tiny.set(0, 0, true); // 0.1%
        let big_ten = rect_mask(100, 10, 0, 0, 100, 1);
        assert!(!area_filter(
            &MaskSequence::new(vec![big_ten, tiny]).unwrap(),
            &cfg
        ));
        assert!(AreaFilterConfig::new(0.6, 0.5).is_err());
        assert!(AreaFilterConfig::new(0.0, 0.5).is_err());
    }

    #[test]
    fn crop_of_full_mask_is_identity() {
        let f = RgbImage::from_fn(16, 12, |x, y| Rgb([x as u8, y as u8, 9]));
        let frames = FrameSequence::new(vec![f.clone(), f], Fps::integer(5).unwrap(), "s").unwrap();
        let masks = MaskSequence::new(vec![Mask::full(16, 12), Mask::full(16, 12)]).unwrap();
        assert_eq!(crop_entity(&frames, &masks).unwrap(), frames);
    }

    #[test]
    fn crop_centered_blob() {
        let f = RgbImage::from_pixel(64, 64, Rgb([200, 100, 50]));
        let frames = FrameSequence::from_image(f, Fps::integer(1).unwrap(), "s");
        let masks = MaskSequence::new(vec![rect_mask(64, 64, 30, 30, 34, 34)]).unwrap();
        let out = crop_entity(&frames, &masks).unwrap();
        let img = &out.frames()[0];
        assert_eq!(img.dimensions(), (20, 20));
        for (x, y, p) in img.enumerate_pixels() {
            let inside = (8..12).contains(&x) && (8..12).contains(&y);
            assert_eq!(p.0, if inside { [200, 100, 50] } else { [0, 0, 0] });
        }
    }

    #[test]
    fn crop_window_is_shared() {
        let frames: Vec<_> = (0..3u8)
            .map(|i| RgbImage::from_pixel(32, 32, Rgb([i * 40, 0, 0])))
            .collect();
        let frames = FrameSequence::new(frames, Fps::integer(1).unwrap(), "s").unwrap();
        let masks = MaskSequence::new(vec![
            rect_mask(32, 32, 2, 2, 4, 4),
            rect_mask(32, 32, 20, 20, 22, 22),
            rect_mask(32, 32, 10, 10, 12, 12),
        ])
        .unwrap();
        let out = crop_entity(&frames, &masks).unwrap();
        assert!(out.frames().iter().all(|f| f.dimensions() == (30, 30)));
    }
}
