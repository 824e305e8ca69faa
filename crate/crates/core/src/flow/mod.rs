//! Dense optical flow, flow-based mask warping and the two deletion-mask
//! propagation modes (flow warping and donor copying).
//!
//! Flow sidecar files (`.flo16`) are little-endian:
//!
//! ```text
//! magic    8 bytes   "VFFLOW01"
//! width    u32
//! height   u32
//! data     width * height * (i16 dx, i16 dy), row-major, units of 1/64 px
//! ```

mod block_match;
mod propagate;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::model::{Frame, ModelError};

pub use block_match::{block_match_flow, BlockMatchConfig, BuiltinFlow};
pub use propagate::{propagate_by_copy, propagate_by_flow, warp_mask, WARP_CLOSING_RADIUS};

pub const SIDECAR_MAGIC: &[u8; 8] = b"VFFLOW01";
/// Fixed-point steps per pixel in sidecar files.
pub const SIDECAR_SCALE: f32 = 64.0;

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("resolution mismatch: {a:?} vs {b:?}")]
    ResolutionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("shape mismatch: mask {mask:?} vs flow {flow:?}")]
    ShapeMismatch { mask: (u32, u32), flow: (u32, u32) },
    #[error("propagated mask vanished at frame {frame}")]
    EmptyMask { frame: usize },
    #[error("donor has {donor} masks, need {needed}")]
    DonorTooShort { donor: usize, needed: usize },
    #[error("invalid flow field: {0}")]
    InvalidField(String),
    #[error("flow estimator failed: {0}")]
    Estimator(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-pixel displacement `(dx, dy)` from frame `i` to frame `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: u32,
    height: u32,
    data: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0, 0.0]; width as usize * height as usize],
        }
    }

    pub fn uniform(width: u32, height: u32, dx: f32, dy: f32) -> Self {
        Self {
            width,
            height,
            data: vec![[dx, dy]; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<[f32; 2]>) -> Result<Self, FlowError> {
        if data.len() != width as usize * height as usize {
            return Err(FlowError::InvalidField(format!(
                "{} vectors for {width}x{height}",
                data.len()
            )));
        }
        let field = Self {
            width,
            height,
            data,
        };
        field.validate()?;
        Ok(field)
    }

    /// Values must be finite with magnitude at most `max(width, height)`.
    pub fn validate(&self) -> Result<(), FlowError> {
        let limit = self.width.max(self.height) as f32;
        for (i, [dx, dy]) in self.data.iter().enumerate() {
            if !dx.is_finite() || !dy.is_finite() {
                return Err(FlowError::InvalidField(format!("non-finite vector at {i}")));
            }
            if (dx * dx + dy * dy).sqrt() > limit {
                return Err(FlowError::InvalidField(format!(
                    "vector at {i} exceeds {limit} px"
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn at(&self, x: u32, y: u32) -> [f32; 2] {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn as_slice(&self) -> &[[f32; 2]] {
        &self.data
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<(), FlowError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(SIDECAR_MAGIC)?;
        out.write_all(&self.width.to_le_bytes())?;
        out.write_all(&self.height.to_le_bytes())?;
        let q = |v: f32| (v * SIDECAR_SCALE).round().clamp(i16::MIN as f32, i16::MAX as f32) as i16;
        for [dx, dy] in &self.data {
            out.write_all(&q(*dx).to_le_bytes())?;
            out.write_all(&q(*dy).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_sidecar(path: &Path) -> Result<Self, FlowError> {
        let mut input = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != SIDECAR_MAGIC {
            return Err(FlowError::InvalidField("bad sidecar magic".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let width = u32::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let height = u32::from_le_bytes(word);
        let n = width as usize * height as usize;
        let mut raw = vec![0u8; n * 4];
        input.read_exact(&mut raw)?;
        if input.read(&mut [0u8; 1])? != 0 {
            return Err(FlowError::InvalidField("trailing bytes in sidecar".into()));
        }
        let data = raw
            .chunks_exact(4)
            .map(|c| {
                [
                    f32::from(i16::from_le_bytes([c[0], c[1]])) / SIDECAR_SCALE,
                    f32::from(i16::from_le_bytes([c[2], c[3]])) / SIDECAR_SCALE,
                ]
            })
            .collect();
        Self::from_vec(width, height, data)
    }
}

/// Anything that can produce a dense flow field between two frames.
pub trait FlowEstimator: Send + Sync {
    fn estimate(&self, a: &Frame, b: &Frame) -> Result<FlowField, FlowError>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sidecar_layout_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.flo16");
        FlowField::from_vec(2, 1, vec![[1.0, -0.5], [0.015625, 1.5]])
            .unwrap()
            .write_sidecar(&p)
            .unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let mut expected = b"VFFLOW01".to_vec();
        expected.extend_from_slice(&[2, 0, 0, 0, 1, 0, 0, 0]);
        for v in [64i16, -32, 1, 96] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(FlowField::from_vec(2, 2, vec![[0.0, 0.0]; 3]).is_err());
        assert!(FlowField::from_vec(1, 1, vec![[f32::NAN, 0.0]]).is_err());
        assert!(FlowField::from_vec(2, 2, vec![[3.0, 0.0]; 4]).is_err());
    }

    proptest! {
        #[test]
        fn sidecar_round_trip_is_exact_on_the_grid(
            vals in proptest::collection::vec((-128i16..128, -128i16..128), 12)
        ) {
            let data: Vec<[f32; 2]> = vals
                .iter()
                .map(|&(a, b)| [f32::from(a) / 64.0, f32::from(b) / 64.0])
                .collect();
            let f = FlowField::from_vec(4, 3, data).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("f.flo16");
            f.write_sidecar(&p).unwrap();
            prop_assert_eq!(FlowField::read_sidecar(&p).unwrap(), f);
        }
    }
}
