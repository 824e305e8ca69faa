//! Sample data model: frame and mask sequences, the masked-video identity,
//! sample records and their on-disk manifests.

mod layout;
mod manifest;
mod record;

use std::fmt;
use std::str::FromStr;

use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use layout::{
    count_frames, count_masks, frame_files, frame_path, load_frames, load_masks, mask_path, resolve_ref, save_frames,
    save_masks,
};
pub use manifest::{
    read_eval_records, read_manifest, write_manifest, DatasetStats, Manifest, ManifestWriter,
};
pub use record::{
    CaptionLength, EvalRecord, Propagation, SampleRecord, Task, DELETION_CAPTION, SCHEMA_VERSION,
};

/// An 8-bit RGB frame.
pub type Frame = RgbImage;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("length mismatch: {frames} frames vs {masks} masks")]
    LengthMismatch { frames: usize, masks: usize },
    #[error("resolution mismatch: expected {expected:?}, found {found:?}")]
    ResolutionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("sequence must contain at least one frame")]
    EmptySequence,
    #[error("mask value {value} at ({x}, {y}) is not binary")]
    NonBinaryMask { value: u8, x: u32, y: u32 },
    #[error("invalid fps: {0}")]
    InvalidFps(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("no frames found in {0}")]
    NoFrames(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Frames per second as a positive rational, serialized as `"num/den"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fps {
    num: u32,
    den: u32,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(ModelError::InvalidFps(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(fps: u32) -> Result<Self> {
        Self::new(fps, 1)
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// Rate after keeping every `factor`-th frame.
    pub fn divided_by(&self, factor: u32) -> Self {
        Self::new(self.num, self.den.saturating_mul(factor.max(1))).expect("positive")
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Fps {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || ModelError::InvalidFps(s.to_string());
        match s.trim().split_once('/') {
            Some((n, d)) => Fps::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            ),
            None => Fps::new(s.trim().parse().map_err(|_| bad())?, 1),
        }
    }
}

impl Serialize for Fps {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    /// Grows the rectangle by `pad` on every side, clamped to `width x height`.
    pub fn padded(&self, pad: u32, width: u32, height: u32) -> Rect {
        Rect {
            x0: self.x0.saturating_sub(pad),
            y0: self.y0.saturating_sub(pad),
            x1: (self.x1 + pad).min(width),
            y1: (self.y1 + pad).min(height),
        }
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// A binary raster. Set pixels are stored as `true` and written to disk as 255.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("count", &self.count())
            .field("bbox", &self.bbox())
            .finish()
    }
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_rect(width: u32, height: u32, rect: Rect) -> Self {
        Self::from_fn(width, height, |x, y| rect.contains(x, y))
    }

    /// Strict conversion: every value must be 0 or 255.
    pub fn from_gray(img: &GrayImage) -> Result<Self> {
        let mut data = Vec::with_capacity(img.as_raw().len());
        for (x, y, Luma([v])) in img.enumerate_pixels() {
            match *v {
                0 => data.push(false),
                255 => data.push(true),
                value => return Err(ModelError::NonBinaryMask { value, x, y }),
            }
        }
        Ok(Self {
            width: img.width(),
            height: img.height(),
            data,
        })
    }

    /// Binarizes with `value >= threshold`.
    pub fn from_gray_threshold(img: &GrayImage, threshold: u8) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.as_raw().iter().map(|&v| v >= threshold).collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        let raw = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayImage::from_raw(self.width, self.height, raw).expect("buffer size matches")
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

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[self.index(x, y)]
    }

    /// Like [`Mask::get`] but returns `false` outside the raster.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as u64) < u64::from(self.width)
            && (y as u64) < u64::from(self.height)
            && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn count(&self) -> u64 {
        self.data.iter().filter(|&&b| b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.count() as f64 / self.data.len() as f64
    }

    /// Coordinates of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    pub fn bbox(&self) -> Option<Rect> {
        let mut rect: Option<Rect> = None;
        for (x, y) in self.iter_set() {
            let r = rect.get_or_insert(Rect {
                x0: x,
                y0: y,
                x1: x + 1,
                y1: y + 1,
            });
            r.x0 = r.x0.min(x);
            r.x1 = r.x1.max(x + 1);
            r.y1 = r.y1.max(y + 1);
        }
        rect
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dimensions() == other.dimensions()
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn intersection_count(&self, other: &Mask) -> u64 {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a && b)
            .count() as u64
    }

    /// Intersection over union; two empty masks have IoU 1.
    pub fn iou(&self, other: &Mask) -> f64 {
        let inter = self.intersection_count(other);
        let union = self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a || b)
            .count() as u64;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn inverted(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// Translates by `(dx, dy)`, dropping pixels that leave the raster.
    pub fn translated(&self, dx: i64, dy: i64) -> Mask {
        Mask::from_fn(self.width, self.height, |x, y| {
            self.get_signed(i64::from(x) - dx, i64::from(y) - dy)
        })
    }
}

/// An ordered, non-empty list of same-sized RGB frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: Fps,
    source_id: String,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: Fps, source_id: impl Into<String>) -> Result<Self> {
        let first = frames.first().ok_or(ModelError::EmptySequence)?;
        let expected = first.dimensions();
        if let Some(f) = frames.iter().find(|f| f.dimensions() != expected) {
            return Err(ModelError::ResolutionMismatch {
                expected,
                found: f.dimensions(),
            });
        }
        Ok(Self {
            frames,
            fps,
            source_id: source_id.into(),
        })
    }

    /// An image is a one-frame sequence.
    pub fn from_image(image: Frame, fps: Fps, source_id: impl Into<String>) -> Self {
        Self::new(vec![image], fps, source_id).expect("one frame")
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn resolution(&self) -> (u32, u32) {
        self.frames[0].dimensions()
    }

    pub fn is_image(&self) -> bool {
        self.frames.len() == 1
    }

    /// Same metadata, new frames.
    pub fn with_frames(&self, frames: Vec<Frame>) -> Result<Self> {
        Self::new(frames, self.fps, self.source_id.clone())
    }

    pub fn with_fps(mut self, fps: Fps) -> Self {
        self.fps = fps;
        self
    }
}

/// An ordered, non-empty list of same-sized binary masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSequence {
    masks: Vec<Mask>,
}

impl MaskSequence {
    pub fn new(masks: Vec<Mask>) -> Result<Self> {
        let first = masks.first().ok_or(ModelError::EmptySequence)?;
        let expected = first.dimensions();
        if let Some(m) = masks.iter().find(|m| m.dimensions() != expected) {
            return Err(ModelError::ResolutionMismatch {
                expected,
                found: m.dimensions(),
            });
        }
        Ok(Self { masks })
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn into_masks(self) -> Vec<Mask> {
        self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn resolution(&self) -> (u32, u32) {
        self.masks[0].dimensions()
    }

    pub fn first(&self) -> &Mask {
        &self.masks[0]
    }

    /// Index of the first frame whose mask has no set pixels.
    pub fn first_empty(&self) -> Option<usize> {
        self.masks.iter().position(Mask::is_empty)
    }

    pub fn check_pairs_with(&self, frames: &FrameSequence) -> Result<()> {
        if self.len() != frames.len() {
            return Err(ModelError::LengthMismatch {
                frames: frames.len(),
                masks: self.len(),
            });
        }
        if self.resolution() != frames.resolution() {
            return Err(ModelError::ResolutionMismatch {
                expected: frames.resolution(),
                found: self.resolution(),
            });
        }
        Ok(())
    }
}

/// Zeroes every pixel under the mask of a single frame.
pub fn apply_mask_frame(frame: &Frame, mask: &Mask) -> Frame {
    let mut out = frame.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        if mask.get(x, y) {
            *px = Rgb([0, 0, 0]);
        }
    }
    out
}

/// Builds the masked video: pixels under the mask become black, all others
/// are copied unchanged.
pub fn apply_mask(frames: &FrameSequence, masks: &MaskSequence) -> Result<FrameSequence> {
    masks.check_pairs_with(frames)?;
    let out = frames
        .frames()
        .iter()
        .zip(masks.masks())
        .map(|(f, m)| apply_mask_frame(f, m))
        .collect();
    frames.with_frames(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_frame(w: u32, h: u32, v: u8) -> Frame {
        RgbImage::from_pixel(w, h, Rgb([v, v, v]))
    }

    fn seq(frames: Vec<Frame>) -> FrameSequence {
        FrameSequence::new(frames, Fps::integer(30).unwrap(), "t").unwrap()
    }

    #[test]
    fn full_mask_erases_everything() {
        let frames = seq(vec![gray_frame(4, 3, 100)]);
        let masks = MaskSequence::new(vec![Mask::full(4, 3)]).unwrap();
        let out = apply_mask(&frames, &masks).unwrap();
        assert!(out.frames()[0].pixels().all(|p| p.0 == [0, 0, 0]));
    }

    #[test]
    fn empty_mask_is_identity() {
        let mut f = gray_frame(5, 5, 7);
        f.put_pixel(2, 3, Rgb([1, 2, 3]));
        let frames = seq(vec![f.clone()]);
        let masks = MaskSequence::new(vec![Mask::new(5, 5)]).unwrap();
        assert_eq!(apply_mask(&frames, &masks).unwrap().frames()[0], f);
    }

    #[test]
    fn single_pixel_erasure() {
        let mut f = RgbImage::new(2, 2);
        for (i, p) in f.pixels_mut().enumerate() {
            *p = Rgb([10 + i as u8, 20, 30]);
        }
        let mut m = Mask::new(2, 2);
        m.set(0, 0, true);
        let out = apply_mask(&seq(vec![f.clone()]), &MaskSequence::new(vec![m]).unwrap()).unwrap();
        let out = &out.frames()[0];
        assert_eq!(out.get_pixel(0, 0).0, [0, 0, 0]);
        for (x, y) in [(1, 0), (0, 1), (1, 1)] {
            assert_eq!(out.get_pixel(x, y), f.get_pixel(x, y));
        }
    }

    #[test]
    fn apply_mask_rejects_mismatches() {
        let frames = seq(vec![gray_frame(4, 4, 1), gray_frame(4, 4, 1)]);
        let one = MaskSequence::new(vec![Mask::new(4, 4)]).unwrap();
        assert!(matches!(
            apply_mask(&frames, &one),
            Err(ModelError::LengthMismatch { frames: 2, masks: 1 })
        ));
        let wrong = MaskSequence::new(vec![Mask::new(3, 4), Mask::new(3, 4)]).unwrap();
        assert!(matches!(
            apply_mask(&frames, &wrong),
            Err(ModelError::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn sequences_reject_mixed_resolutions() {
        let err = FrameSequence::new(
            vec![gray_frame(4, 4, 0), gray_frame(4, 5, 0)],
            Fps::integer(1).unwrap(),
            "x",
        );
        assert!(matches!(err, Err(ModelError::ResolutionMismatch { .. })));
        assert!(matches!(
            FrameSequence::new(vec![], Fps::integer(1).unwrap(), "x"),
            Err(ModelError::EmptySequence)
        ));
    }

    #[test]
    fn strict_mask_conversion() {
        let mut g = GrayImage::new(3, 3);
        g.put_pixel(1, 1, Luma([255]));
        let m = Mask::from_gray(&g).unwrap();
        assert_eq!(m.count(), 1);
        assert_eq!(m.to_gray(), g);
        g.put_pixel(0, 0, Luma([128]));
        assert!(matches!(
            Mask::from_gray(&g),
            Err(ModelError::NonBinaryMask { value: 128, x: 0, y: 0 })
        ));
        assert_eq!(Mask::from_gray_threshold(&g, 128).count(), 2);
    }

    #[test]
    fn fps_parsing_and_reduction() {
        assert_eq!("30".parse::<Fps>().unwrap(), Fps::new(30, 1).unwrap());
        let ntsc: Fps = "30000/1001".parse().unwrap();
        assert_eq!(ntsc.to_string(), "30000/1001");
        assert_eq!(Fps::new(60, 2).unwrap().to_string(), "30/1");
        assert_eq!(Fps::integer(30).unwrap().divided_by(4).to_string(), "15/2");
        assert!("0".parse::<Fps>().is_err());
        assert!("a/b".parse::<Fps>().is_err());
    }

    #[test]
    fn bbox_and_translation() {
        let mut m = Mask::new(10, 10);
        m.set(2, 3, true);
        m.set(5, 7, true);
        assert_eq!(
            m.bbox(),
            Some(Rect {
                x0: 2,
                y0: 3,
                x1: 6,
                y1: 8
            })
        );
        let t = m.translated(5, 0);
        assert!(t.get(7, 3));
        assert_eq!(t.count(), 1);
        assert_eq!(Mask::new(3, 3).bbox(), None);
    }
}
