//! The two dataset-construction pipelines (addition/modification and
//! deletion) and the plumbing they share: corpus listings, seeding, region
//! selection and the on-disk sample store.

mod addmod;
mod deletion;

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::FlowError;
use crate::geometry::{AreaFilterConfig, GeometryError};
use crate::model::{
    apply_mask, frame_files, load_frames, save_frames, save_masks, Fps, Frame, FrameSequence, Mask, MaskSequence,
    ModelError,
};
use crate::perception::{filter_labels, FilterMode, Gateway, PerceptionError, VocabularyConfig};

pub use addmod::{build_addmod_samples, run_addmod, AddmodConfig, RunSummary};
pub use deletion::{
    run_deletion, synthesize_deletion_samples, Donor, DonorPool, DeletionConfig, BACKGROUND_MAX_FRACTION,
};

/// Entities kept per source, best detection score first.
pub const DEFAULT_MAX_ENTITIES: usize = 4;
/// Manifest file name inside a pipeline output directory.
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("donor pool is empty")]
    EmptyDonorPool,
    #[error("corpus listing line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One source in a corpus listing: a directory of `frame_*.png` files and
/// its frame rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub frames_dir: PathBuf,
    pub fps: Fps,
}

impl CorpusEntry {
    /// The directory name doubles as the source id.
    pub fn source_id(&self) -> String {
        self.frames_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.frames_dir.display().to_string())
    }

    pub fn load(&self) -> Result<FrameSequence, PipelineError> {
        Ok(load_frames(&self.frames_dir, self.fps, self.source_id())?)
    }
}

/// Parses a listing with one `<frames_dir> <fps>` per line. Blank lines and
/// `#` comments are skipped; relative directories resolve against `base`
/// and are made absolute so that manifests written elsewhere can find them.
pub fn parse_corpus_listing(text: &str, base: &Path) -> Result<Vec<CorpusEntry>, PipelineError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| PipelineError::Corpus { line: i + 1, message };
        let (path, fps) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| err("expected `<frames_dir> <fps>`".into()))?;
        let fps: Fps = fps.parse().map_err(|e: ModelError| err(e.to_string()))?;
        let path = Path::new(path.trim());
        let frames_dir = std::path::absolute(base.join(path))?;
        out.push(CorpusEntry { frames_dir, fps });
    }
    Ok(out)
}

pub fn read_corpus_listing(path: &Path) -> Result<Vec<CorpusEntry>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    parse_corpus_listing(&text, path.parent().unwrap_or(Path::new("")))
}

/// Sources below this short side are flagged at ingestion.
pub const MIN_SHORT_SIDE: u32 = 720;
/// Videos shorter than this are flagged at ingestion.
pub const MIN_DURATION_SECS: f64 = 5.0;

/// Result of checking an ingested frame directory against the corpus
/// requirements. Single frames are images and skip the duration check.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCheck {
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub duration_secs: f64,
    pub problems: Vec<String>,
}

impl SourceCheck {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

pub fn check_source(frames_dir: &Path, fps: Fps) -> Result<SourceCheck, PipelineError> {
    let files = frame_files(frames_dir)?;
    let first = files
        .first()
        .ok_or_else(|| ModelError::NoFrames(frames_dir.display().to_string()))?;
    let (width, height) = image::image_dimensions(first).map_err(ModelError::from)?;
    let frames = files.len();
    let duration_secs = frames as f64 / fps.as_f64();
    let mut problems = Vec::new();
    if width.min(height) < MIN_SHORT_SIDE {
        problems.push(format!(
            "resolution {width}x{height} is below {MIN_SHORT_SIDE}p"
        ));
    }
    if frames > 1 && duration_secs < MIN_DURATION_SECS {
        problems.push(format!(
            "duration {duration_secs:.2} s is below {MIN_DURATION_SECS} s"
        ));
    }
    Ok(SourceCheck {
        frames,
        width,
        height,
        duration_secs,
        problems,
    })
}

/// Independent sub-seed for `stream` (a source index, entity index, ...).
/// Results do not depend on scheduling order.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// A labelled region found on the first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub label: String,
    pub mask: Mask,
    pub score: f64,
}

/// tag → vocabulary filter → detect → segment → area filter, keeping the
/// best `max_regions` by detection score.
fn find_regions(
    gateway: &Gateway,
    frame: &Frame,
    vocab: &VocabularyConfig,
    mode: FilterMode,
    area: &AreaFilterConfig,
    max_regions: usize,
) -> Result<Vec<Region>, PipelineError> {
    let labels = filter_labels(&gateway.tag_frame(frame)?, mode, vocab);
    let mut found = Vec::new();
    for label in labels {
        for det in gateway.detect_label(frame, &label)? {
            let mask = gateway.segment_box(frame, det.bbox)?;
            if mask.is_empty() || !area.accepts(&mask) {
                continue;
            }
            found.push(Region {
                label: label.clone(),
                mask,
                score: det.score,
            });
        }
    }
    // Stable: ties keep tag order, then detector order.
    found.sort_by(|a, b| b.score.total_cmp(&a.score));
    found.truncate(max_regions);
    Ok(found)
}

/// Editable foreground entities of a frame.
pub fn select_entities(
    gateway: &Gateway,
    frame: &Frame,
    vocab: &VocabularyConfig,
    area: &AreaFilterConfig,
    max_entities: usize,
) -> Result<Vec<Region>, PipelineError> {
    find_regions(gateway, frame, vocab, FilterMode::Foreground, area, max_entities)
}

/// Background areas of a frame that can host a pasted donor mask.
pub fn position_background(
    gateway: &Gateway,
    frame: &Frame,
    vocab: &VocabularyConfig,
    area: &AreaFilterConfig,
    max_regions: usize,
) -> Result<Vec<Region>, PipelineError> {
    find_regions(gateway, frame, vocab, FilterMode::Background, area, max_regions)
}

/// Writes masks and masked frames into one sample directory under `root`
/// and returns its path relative to `root`.
pub fn store_sample(
    root: &Path,
    rel: &Path,
    frames: &FrameSequence,
    masks: &MaskSequence,
) -> Result<PathBuf, PipelineError> {
    let dir = root.join(rel);
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    save_masks(&dir, masks)?;
    save_frames(&dir, &apply_mask(frames, masks)?)?;
    Ok(rel.to_path_buf())
}
