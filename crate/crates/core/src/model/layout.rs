//! Directory layout: `frame_%05d.png` (RGB) and `mask_%05d.png` (gray, 0/255).

use std::fs;
use std::path::{Path, PathBuf};

use super::{Fps, FrameSequence, Mask, MaskSequence, ModelError, Result};

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("frame_{index:05}.png"))
}

pub fn mask_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("mask_{index:05}.png"))
}

/// Resolves a manifest reference against the manifest's directory.
pub fn resolve_ref(base: &Path, reference: &Path) -> PathBuf {
    if reference.is_absolute() {
        reference.to_path_buf()
    } else {
        base.join(reference)
    }
}

fn numbered(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(idx) = name
            .strip_prefix(prefix)
            .and_then(|rest| rest.strip_suffix(".png"))
            .and_then(|n| n.parse::<usize>().ok())
        else {
            continue;
        };
        found.push((idx, path));
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// `frame_*.png` files in `dir`, in index order.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    numbered(dir, "frame_")
}

/// Number of `frame_*.png` files in `dir`.
pub fn count_frames(dir: &Path) -> Result<usize> {
    Ok(numbered(dir, "frame_")?.len())
}

/// Number of `mask_*.png` files in `dir`.
pub fn count_masks(dir: &Path) -> Result<usize> {
    Ok(numbered(dir, "mask_")?.len())
}

pub fn save_frames(dir: &Path, frames: &FrameSequence) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.frames().iter().enumerate() {
        f.save(frame_path(dir, i))?;
    }
    Ok(())
}

pub fn load_frames(dir: &Path, fps: Fps, source_id: impl Into<String>) -> Result<FrameSequence> {
    let paths = numbered(dir, "frame_")?;
    if paths.is_empty() {
        return Err(ModelError::NoFrames(dir.display().to_string()));
    }
    let frames = paths
        .iter()
        .map(|p| Ok(image::open(p)?.into_rgb8()))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, fps, source_id)
}

pub fn save_masks(dir: &Path, masks: &MaskSequence) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, m) in masks.masks().iter().enumerate() {
        m.to_gray().save(mask_path(dir, i))?;
    }
    Ok(())
}

/// Loads masks, rejecting any non-binary pixel.
pub fn load_masks(dir: &Path) -> Result<MaskSequence> {
    let paths = numbered(dir, "mask_")?;
    if paths.is_empty() {
        return Err(ModelError::NoFrames(dir.display().to_string()));
    }
    let masks = paths
        .iter()
        .map(|p| Mask::from_gray(&image::open(p)?.into_luma8()))
        .collect::<Result<Vec<_>>>()?;
    MaskSequence::new(masks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    #[test]
    fn frames_and_masks_round_trip_through_png() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (0..3u8)
            .map(|i| RgbImage::from_fn(6, 4, |x, y| Rgb([i, x as u8, y as u8])))
            .collect();
        let seq = FrameSequence::new(frames, Fps::integer(24).unwrap(), "s").unwrap();
        save_frames(dir.path(), &seq).unwrap();
        assert!(dir.path().join("frame_00002.png").exists());
        assert_eq!(count_frames(dir.path()).unwrap(), 3);
        let back = load_frames(dir.path(), seq.fps(), "s").unwrap();
        assert_eq!(back, seq);

        let masks = MaskSequence::new(vec![
            Mask::from_fn(6, 4, |x, _| x < 3),
            Mask::from_fn(6, 4, |_, y| y == 1),
        ])
        .unwrap();
        save_masks(dir.path(), &masks).unwrap();
        assert!(dir.path().join("mask_00001.png").exists());
        assert_eq!(load_masks(dir.path()).unwrap(), masks);
    }

    #[test]
    fn missing_frames_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_frames(dir.path(), Fps::integer(1).unwrap(), "x"),
            Err(ModelError::NoFrames(_))
        ));
    }

    #[test]
    fn relative_refs_resolve_against_base() {
        assert_eq!(
            resolve_ref(Path::new("/data/out"), Path::new("samples/a")),
            PathBuf::from("/data/out/samples/a")
        );
        assert_eq!(
            resolve_ref(Path::new("/data/out"), Path::new("/abs/a")),
            PathBuf::from("/abs/a")
        );
    }
}
