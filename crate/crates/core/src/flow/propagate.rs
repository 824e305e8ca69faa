use rayon::prelude::*;

use super::{FlowError, FlowEstimator, FlowField};
use crate::geometry::{close_disk, PasteTransform};
use crate::model::{FrameSequence, Mask, MaskSequence};

/// Closing radius applied after forward advection.
pub const WARP_CLOSING_RADIUS: u32 = 1;

/// Forward-advects every set pixel by its rounded flow vector, drops pixels
/// that leave the frame, then closes the result to fill rounding holes.
pub fn warp_mask(mask: &Mask, flow: &FlowField) -> Result<Mask, FlowError> {
    if mask.dimensions() != flow.dimensions() {
        return Err(FlowError::ShapeMismatch {
            mask: mask.dimensions(),
            flow: flow.dimensions(),
        });
    }
    let (w, h) = mask.dimensions();
    let mut out = Mask::new(w, h);
    for (x, y) in mask.iter_set() {
        let [dx, dy] = flow.at(x, y);
        let nx = i64::from(x) + dx.round() as i64;
        let ny = i64::from(y) + dy.round() as i64;
        if nx >= 0 && ny >= 0 && nx < i64::from(w) && ny < i64::from(h) {
            out.set(nx as u32, ny as u32, true);
        }
    }
    if out.is_empty() {
        return Ok(out);
    }
    Ok(close_disk(&out, WARP_CLOSING_RADIUS))
}

/// Chains frame-to-frame warps from the keyframe mask. Flow fields for all
/// frame pairs are estimated in parallel; warps then apply in order.
pub fn propagate_by_flow(
    frames: &FrameSequence,
    keyframe_mask: &Mask,
    estimator: &dyn FlowEstimator,
) -> Result<MaskSequence, FlowError> {
    if keyframe_mask.dimensions() != frames.resolution() {
        return Err(FlowError::ShapeMismatch {
            mask: keyframe_mask.dimensions(),
            flow: frames.resolution(),
        });
    }
    if keyframe_mask.is_empty() {
        return Err(FlowError::EmptyMask { frame: 0 });
    }
    let flows: Vec<FlowField> = frames
        .frames()
        .par_windows(2)
        .map(|pair| estimator.estimate(&pair[0], &pair[1]))
        .collect::<Result<_, _>>()?;
    let mut masks = Vec::with_capacity(frames.len());
    masks.push(keyframe_mask.clone());
    for (i, flow) in flows.iter().enumerate() {
        let next = warp_mask(masks.last().expect("non-empty"), flow)?;
        if next.is_empty() {
            return Err(FlowError::EmptyMask { frame: i + 1 });
        }
        masks.push(next);
    }
    Ok(MaskSequence::new(masks)?)
}

/// Replays the donor's own mask trajectory under the paste transform.
pub fn propagate_by_copy(
    donor: &MaskSequence,
    transform: &PasteTransform,
    target_len: usize,
    resolution: (u32, u32),
) -> Result<MaskSequence, FlowError> {
    if donor.len() < target_len {
        return Err(FlowError::DonorTooShort {
            donor: donor.len(),
            needed: target_len,
        });
    }
    let masks = donor.masks()[..target_len]
        .iter()
        .map(|m| transform.apply(m, resolution.0, resolution.1))
        .collect();
    Ok(MaskSequence::new(masks)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Fps, Rect};
    use image::{Rgb, RgbImage};

    fn square(w: u32, h: u32, x0: u32, y0: u32, side: u32) -> Mask {
        Mask::from_rect(
            w,
            h,
            Rect {
                x0,
                y0,
                x1: x0 + side,
                y1: y0 + side,
            },
        )
    }

    #[test]
    fn zero_flow_keeps_solid_blob() {
        let m = square(20, 20, 5, 6, 7);
        assert_eq!(warp_mask(&m, &FlowField::zeros(20, 20)).unwrap(), m);
    }

    #[test]
    fn uniform_flow_translates() {
        let m = square(20, 20, 5, 6, 7);
        let out = warp_mask(&m, &FlowField::uniform(20, 20, 2.0, 0.0)).unwrap();
        assert_eq!(out, m.translated(2, 0));
    }

    #[test]
    fn off_frame_pixels_are_dropped() {
        let m = square(20, 20, 14, 0, 6);
        let out = warp_mask(&m, &FlowField::uniform(20, 20, 3.0, 0.0)).unwrap();
        assert_eq!(out.count(), 3 * 6);
        let gone = warp_mask(&m, &FlowField::uniform(20, 20, 19.0, 0.0)).unwrap();
        assert!(gone.is_empty());
    }

    #[test]
    fn warp_shape_mismatch() {
        assert!(matches!(
            warp_mask(&Mask::new(4, 4), &FlowField::zeros(4, 5)),
            Err(FlowError::ShapeMismatch { .. })
        ));
    }

    struct Uniform(f32, f32);

    impl FlowEstimator for Uniform {
        fn estimate(&self, a: &crate::model::Frame, _: &crate::model::Frame) -> Result<FlowField, FlowError> {
            Ok(FlowField::uniform(a.width(), a.height(), self.0, self.1))
        }
    }

    fn blank(n: usize) -> FrameSequence {
        FrameSequence::new(
            vec![RgbImage::from_pixel(24, 24, Rgb([9, 9, 9])); n],
            Fps::integer(10).unwrap(),
            "b",
        )
        .unwrap()
    }

    #[test]
    fn single_frame_returns_keyframe() {
        let m = square(24, 24, 3, 3, 4);
        let out = propagate_by_flow(&blank(1), &m, &Uniform(1.0, 0.0)).unwrap();
        assert_eq!(out.masks(), std::slice::from_ref(&m));
    }

    #[test]
    fn identity_flow_gives_constant_sequence() {
        let m = square(24, 24, 3, 3, 4);
        let out = propagate_by_flow(&blank(5), &m, &Uniform(0.0, 0.0)).unwrap();
        assert!(out.masks().iter().all(|x| *x == m));
    }

    #[test]
    fn vanishing_mask_is_an_error() {
        let m = square(24, 24, 18, 3, 4);
        let err = propagate_by_flow(&blank(4), &m, &Uniform(4.0, 0.0)).unwrap_err();
        assert!(matches!(err, FlowError::EmptyMask { frame: 2 }), "{err:?}");
    }

    #[test]
    fn copy_follows_donor_motion() {
        let donor = MaskSequence::new((0..5).map(|i| square(32, 32, 2 + i, 4, 3)).collect()).unwrap();
        let t = PasteTransform {
            anchor: (2, 4),
            offset: (10, 20),
            scale: 1.0,
        };
        let out = propagate_by_copy(&donor, &t, 5, (40, 40)).unwrap();
        for (i, m) in out.masks().iter().enumerate() {
            assert_eq!(*m, square(40, 40, 10 + i as u32, 20, 3));
        }
        let static_donor = MaskSequence::new(vec![square(32, 32, 2, 4, 3); 3]).unwrap();
        let out = propagate_by_copy(&static_donor, &t, 3, (40, 40)).unwrap();
        assert!(out.masks().iter().all(|m| *m == square(40, 40, 10, 20, 3)));
    }

    #[test]
    fn copy_needs_enough_donor_frames() {
        let donor = MaskSequence::new(vec![square(8, 8, 0, 0, 2); 5]).unwrap();
        let t = PasteTransform {
            anchor: (0, 0),
            offset: (0, 0),
            scale: 1.0,
        };
        assert!(matches!(
            propagate_by_copy(&donor, &t, 10, (8, 8)),
            Err(FlowError::DonorTooShort { donor: 5, needed: 10 })
        ));
    }
}
