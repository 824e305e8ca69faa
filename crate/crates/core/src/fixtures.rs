//! Synthetic corpora that the mock perception backend understands.
//!
//! Every source has a static, lightly textured gray background and a
//! light-blue sky patch in its upper part. Videos carry a red car moving one
//! pixel right per frame; images carry a yellow dog and a small blue swatch
//! (a colour word, so it is never selected as an entity).

use std::path::{Path, PathBuf};

use image::Rgb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{save_frames, Fps, Frame, FrameSequence, ModelError};
use crate::perception::MOCK_PALETTE;

/// Name of the listing file written next to the source directories.
pub const LISTING_FILE: &str = "corpus.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub videos: usize,
    pub images: usize,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub fps: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            videos: 2,
            images: 2,
            width: 96,
            height: 64,
            frames: 8,
            fps: 8,
        }
    }
}

fn palette(label: &str) -> Rgb<u8> {
    Rgb(MOCK_PALETTE
        .iter()
        .find(|(l, _)| *l == label)
        .map(|(_, c)| *c)
        .expect("palette label"))
}

/// Fixed per-pixel texture so block matching sees a static background.
fn texture(x: u32, y: u32) -> Rgb<u8> {
    let h = (x.wrapping_mul(73_856_093) ^ y.wrapping_mul(19_349_663)).wrapping_mul(2_654_435_761);
    let v = 80 + (h >> 27) as u8;
    Rgb([v, v, v])
}

#[derive(Debug, Clone, Copy)]
struct Patch {
    x0: i64,
    y0: i64,
    w: i64,
    h: i64,
    color: Rgb<u8>,
}

impl Patch {
    fn contains(&self, x: u32, y: u32) -> bool {
        let (x, y) = (i64::from(x), i64::from(y));
        x >= self.x0 && x < self.x0 + self.w && y >= self.y0 && y < self.y0 + self.h
    }
}

fn render(width: u32, height: u32, patches: &[Patch]) -> Frame {
    Frame::from_fn(width, height, |x, y| {
        patches
            .iter()
            .rev()
            .find(|p| p.contains(x, y))
            .map_or_else(|| texture(x, y), |p| p.color)
    })
}

fn sky(cfg: &SynthConfig) -> Patch {
    let (w, h) = (i64::from(cfg.width), i64::from(cfg.height));
    Patch {
        x0: w / 12,
        y0: 0,
        w: w * 2 / 3,
        h: h * 5 / 16,
        color: palette("sky"),
    }
}

/// A video whose car starts at a seeded position and moves +1 px per frame.
pub fn synth_video(cfg: &SynthConfig, seed: u64, source_id: &str) -> FrameSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (i64::from(cfg.width), i64::from(cfg.height));
    let (cw, ch) = (w / 8, h / 8);
    let travel = cfg.frames as i64;
    let x0 = rng.random_range(2..(w - cw - travel - 2).max(3));
    let y0 = rng.random_range(h / 2..(h - ch - 2).max(h / 2 + 1));
    let frames = (0..cfg.frames as i64)
        .map(|i| {
            render(
                cfg.width,
                cfg.height,
                &[
                    sky(cfg),
                    Patch {
                        x0: x0 + i,
                        y0,
                        w: cw,
                        h: ch,
                        color: palette("car"),
                    },
                ],
            )
        })
        .collect();
    FrameSequence::new(frames, Fps::integer(cfg.fps).expect("positive fps"), source_id).expect("valid video")
}

/// A still image with a dog, a blue swatch and the sky patch.
pub fn synth_image(cfg: &SynthConfig, seed: u64, source_id: &str) -> FrameSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (i64::from(cfg.width), i64::from(cfg.height));
    let (dw, dh) = (w / 6, h / 6);
    let x0 = rng.random_range(2..(w / 2 - dw).max(3));
    let y0 = rng.random_range(h / 2..(h - dh - 2).max(h / 2 + 1));
    let frame = render(
        cfg.width,
        cfg.height,
        &[
            sky(cfg),
            Patch {
                x0,
                y0,
                w: dw,
                h: dh,
                color: palette("dog"),
            },
            Patch {
                x0: w - w / 6,
                y0: h - h / 4,
                w: w / 10,
                h: h / 8,
                color: palette("blue"),
            },
        ],
    );
    FrameSequence::from_image(frame, Fps::integer(1).expect("positive"), source_id)
}

/// Writes `videos` + `images` sources under `dir` plus a listing file and
/// returns the listing path. Identical arguments give identical bytes.
pub fn synth_corpus(dir: &Path, cfg: &SynthConfig, seed: u64) -> Result<PathBuf, ModelError> {
    std::fs::create_dir_all(dir)?;
    let mut listing = String::new();
    for i in 0..cfg.videos {
        let id = format!("video_{i:03}");
        let v = synth_video(cfg, seed.wrapping_add(i as u64), &id);
        save_frames(&dir.join(&id), &v)?;
        listing.push_str(&format!("{id} {}\n", cfg.fps));
    }
    for i in 0..cfg.images {
        let id = format!("image_{i:03}");
        let im = synth_image(cfg, seed.wrapping_add(1_000_003 + i as u64), &id);
        save_frames(&dir.join(&id), &im)?;
        listing.push_str(&format!("{id} 1\n"));
    }
    let path = dir.join(LISTING_FILE);
    std::fs::write(&path, listing)?;
    Ok(path)
}
