//! Deterministic stand-in for every perception role.
//!
//! The mock "sees" flat palette colours: a pixel belongs to a palette entry
//! when every channel is within [`MOCK_TOLERANCE`] of it. Red regions are
//! cars, light blue regions are sky, and so on. All answers are pure
//! functions of the request.

use std::collections::VecDeque;

use super::{Detection, PerceptionBackend};
use crate::eval::builtin_embedding;
use crate::flow::{block_match_flow, FlowField};
use crate::model::{Frame, Mask, Rect};

pub const MOCK_PALETTE: &[(&str, [u8; 3])] = &[
    ("car", [220, 30, 30]),
    ("sky", [120, 180, 240]),
    ("blue", [30, 30, 220]),
    ("dog", [230, 200, 40]),
    ("meadow", [40, 160, 60]),
];

pub const MOCK_TOLERANCE: u8 = 40;
/// Regions smaller than this are invisible to the mock.
const MIN_REGION_PIXELS: usize = 16;
/// Search margin around the previous mask when tracking.
const TRACK_MARGIN: u32 = 16;

#[derive(Debug, Clone)]
pub struct MockBackend {
    /// Constant returned by `score`.
    pub region_score: f64,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self { region_score: 0.21 }
    }
}

fn classify(p: [u8; 3]) -> Option<usize> {
    MOCK_PALETTE
        .iter()
        .position(|(_, c)| (0..3).all(|i| p[i].abs_diff(c[i]) <= MOCK_TOLERANCE))
}

fn class_of_label(label: &str) -> Option<usize> {
    MOCK_PALETTE.iter().position(|(l, _)| *l == label)
}

fn class_mask(frame: &Frame, class: usize, window: Option<Rect>) -> Mask {
    Mask::from_fn(frame.width(), frame.height(), |x, y| {
        window.is_none_or(|w| w.contains(x, y)) && classify(frame.get_pixel(x, y).0) == Some(class)
    })
}

/// 4-connected components of `mask`, in raster order of their first pixel.
fn components(mask: &Mask) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = mask.dimensions();
    let mut seen = Mask::new(w, h);
    let mut out = Vec::new();
    for (sx, sy) in mask.iter_set() {
        if seen.get(sx, sy) {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([(sx, sy)]);
        seen.set(sx, sy, true);
        while let Some((x, y)) = queue.pop_front() {
            comp.push((x, y));
            let neighbours = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            for (nx, ny) in neighbours {
                if nx < w && ny < h && mask.get(nx, ny) && !seen.get(nx, ny) {
                    seen.set(nx, ny, true);
                    queue.push_back((nx, ny));
                }
            }
        }
        out.push(comp);
    }
    out
}

fn dominant_class(frame: &Frame, region: impl Fn(u32, u32) -> bool) -> Option<usize> {
    let mut counts = vec![0usize; MOCK_PALETTE.len()];
    for (x, y, p) in frame.enumerate_pixels() {
        if region(x, y) {
            if let Some(c) = classify(p.0) {
                counts[c] += 1;
            }
        }
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    if best == 0 {
        return None;
    }
    counts.iter().position(|&c| c == best)
}

impl PerceptionBackend for MockBackend {
    fn tag(&self, frame: &Frame) -> Result<Vec<String>, String> {
        let mut counts = vec![0usize; MOCK_PALETTE.len()];
        for p in frame.pixels() {
            if let Some(c) = classify(p.0) {
                counts[c] += 1;
            }
        }
        Ok(counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n >= MIN_REGION_PIXELS)
            .map(|(i, _)| MOCK_PALETTE[i].0.to_string())
            .collect())
    }

    fn detect(&self, frame: &Frame, label: &str) -> Result<Vec<Detection>, String> {
        let Some(class) = class_of_label(label) else {
            return Ok(Vec::new());
        };
        let mask = class_mask(frame, class, None);
        let mut dets: Vec<Detection> = components(&mask)
            .into_iter()
            .filter(|c| c.len() >= MIN_REGION_PIXELS)
            .map(|c| {
                let x0 = c.iter().map(|p| p.0).min().expect("non-empty");
                let x1 = c.iter().map(|p| p.0).max().expect("non-empty") + 1;
                let y0 = c.iter().map(|p| p.1).min().expect("non-empty");
                let y1 = c.iter().map(|p| p.1).max().expect("non-empty") + 1;
                let bbox = Rect { x0, y0, x1, y1 };
                let fill = c.len() as f64 / bbox.area() as f64;
                Detection {
                    label: label.to_string(),
                    bbox,
                    score: 0.5 + 0.5 * fill,
                }
            })
            .collect();
        dets.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then((a.bbox.y0, a.bbox.x0).cmp(&(b.bbox.y0, b.bbox.x0)))
        });
        Ok(dets)
    }

    fn segment(&self, frame: &Frame, bbox: Rect) -> Result<Mask, String> {
        if bbox.x1 > frame.width() || bbox.y1 > frame.height() || bbox.x0 >= bbox.x1 || bbox.y0 >= bbox.y1 {
            return Err(format!("box {bbox:?} outside frame"));
        }
        Ok(match dominant_class(frame, |x, y| bbox.contains(x, y)) {
            Some(class) => class_mask(frame, class, Some(bbox)),
            None => Mask::new(frame.width(), frame.height()),
        })
    }

    fn propagate(&self, frames: &[Frame], mask: &Mask) -> Result<Vec<Mask>, String> {
        let first = frames.first().ok_or("no frames")?;
        if first.dimensions() != mask.dimensions() {
            return Err("mask does not match frame size".into());
        }
        let Some(class) = dominant_class(first, |x, y| mask.get(x, y)) else {
            return Ok(vec![Mask::new(mask.width(), mask.height()); frames.len()]);
        };
        let mut out = vec![mask.clone()];
        for frame in &frames[1..] {
            let prev = out.last().expect("non-empty");
            let next = match prev.bbox() {
                Some(b) => class_mask(
                    frame,
                    class,
                    Some(b.padded(TRACK_MARGIN, frame.width(), frame.height())),
                ),
                None => Mask::new(frame.width(), frame.height()),
            };
            out.push(next);
        }
        Ok(out)
    }

    fn caption(&self, crops: &[Frame], tag: &str, _prompt: &str) -> Result<String, String> {
        let first = crops.first().ok_or("no frames")?;
        let (w, h) = first.dimensions();
        Ok(format!(
            "The video shows a {tag}.\n\
             The video shows a {tag} near the center of the frame. The {tag} stays clearly visible.\n\
             The video shows a {tag} filling a {w}x{h} crop across {n} frames, with crisp edges against a dark surround.",
            n = crops.len()
        ))
    }

    fn flow(&self, a: &Frame, b: &Frame) -> Result<FlowField, String> {
        block_match_flow(a, b).map_err(|e| e.to_string())
    }

    fn score(&self, _crop: &Frame, _caption: &str) -> Result<f64, String> {
        Ok(self.region_score)
    }

    fn embed(&self, frame: &Frame) -> Result<Vec<f32>, String> {
        Ok(builtin_embedding(frame))
    }
}
