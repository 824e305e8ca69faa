use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::addmod::RunSummary;
use super::{
    derive_seed, position_background, store_sample, CorpusEntry, PipelineError, MANIFEST_FILE,
};
use crate::flow::{propagate_by_copy, propagate_by_flow, FlowError};
use crate::geometry::{augment, paste_mask, AreaFilterConfig, AugmentationKind, GeometryError};
use crate::model::{
    count_masks, load_masks, read_manifest, resolve_ref, write_manifest, CaptionLength, FrameSequence,
    MaskSequence, Propagation, SampleRecord, Task, DELETION_CAPTION,
};
use crate::perception::{Gateway, VocabularyConfig};

/// Backgrounds may be large, so the upper area bound is looser than for
/// entities.
pub const BACKGROUND_MAX_FRACTION: f64 = 0.95;

#[derive(Debug, Clone)]
pub struct DeletionConfig {
    pub vocab: VocabularyConfig,
    /// Bounds on background region size.
    pub area: AreaFilterConfig,
    pub max_regions: usize,
    /// Augmentations applied to each propagated mask sequence. Only the
    /// identity by default.
    pub aug_kinds: Vec<AugmentationKind>,
}

impl Default for DeletionConfig {
    fn default() -> Self {
        Self {
            vocab: VocabularyConfig::default(),
            area: AreaFilterConfig::new(AreaFilterConfig::default().min_fraction, BACKGROUND_MAX_FRACTION)
                .expect("valid bounds"),
            max_regions: super::DEFAULT_MAX_ENTITIES,
            aug_kinds: vec![AugmentationKind::None],
        }
    }
}

/// An un-augmented addition/modification mask sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Donor {
    pub id: String,
    pub masks_dir: PathBuf,
    pub len: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DonorPool {
    pub donors: Vec<Donor>,
}

impl DonorPool {
    /// Collects donors from an addition/modification manifest: records with
    /// no augmentation, one per distinct mask directory, in manifest order.
    pub fn from_manifest(path: &Path) -> Result<Self, PipelineError> {
        let manifest = read_manifest(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut seen = HashSet::new();
        let mut donors = Vec::new();
        for r in &manifest.records {
            if r.task != Task::AdditionModification || r.augmentation != AugmentationKind::None {
                continue;
            }
            let dir = resolve_ref(base, &r.masks_ref);
            if !seen.insert(dir.clone()) {
                continue;
            }
            let len = count_masks(&dir)?;
            donors.push(Donor {
                id: r.id.clone(),
                masks_dir: dir,
                len,
            });
        }
        Ok(Self { donors })
    }

    pub fn is_empty(&self) -> bool {
        self.donors.is_empty()
    }
}

fn is_droppable(e: &PipelineError) -> bool {
    matches!(
        e,
        PipelineError::Flow(FlowError::EmptyMask { .. }) | PipelineError::Geometry(GeometryError::EmptyMask { .. })
    )
}

/// Deletion records for one target. Per background region one donor is
/// drawn; its first mask is pasted into the region, then propagated by
/// copying the donor's trajectory and by flow warping (videos), giving a
/// copied/flowed pair. Images give a single copied record.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_deletion_samples(
    gateway: &Gateway,
    target: &FrameSequence,
    frames_ref: &Path,
    pool: &DonorPool,
    cfg: &DeletionConfig,
    seed: u64,
    out_root: &Path,
) -> Result<Vec<SampleRecord>, PipelineError> {
    if pool.is_empty() {
        return Err(PipelineError::EmptyDonorPool);
    }
    let sid = target.source_id().to_string();
    let (w, h) = target.resolution();
    let regions = position_background(gateway, &target.frames()[0], &cfg.vocab, &cfg.area, cfg.max_regions)?;
    let mut records = Vec::new();
    for (k, region) in regions.iter().enumerate() {
        let region_seed = derive_seed(seed, k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(region_seed);
        let eligible: Vec<&Donor> = pool.donors.iter().filter(|d| d.len >= target.len()).collect();
        if eligible.is_empty() {
            tracing::warn!(source = %sid, region = k, "no donor is long enough");
            continue;
        }
        let donor = eligible[rng.random_range(0..eligible.len())];
        let donor_masks = load_masks(&donor.masks_dir)?;
        let placement = match paste_mask(&region.mask, donor_masks.first(), rng.random()) {
            Ok(p) => p,
            Err(GeometryError::NoFeasiblePlacement { .. }) => {
                tracing::info!(source = %sid, region = k, donor = %donor.id, "no feasible placement");
                continue;
            }
            Err(e) => return Err(e.into()),
        };

        let mut variants: Vec<(Propagation, MaskSequence)> = Vec::new();
        if target.is_image() {
            variants.push((Propagation::Copied, MaskSequence::new(vec![placement.mask.clone()])?));
        } else {
            let donor_slice = &donor_masks.masks()[..target.len()];
            let inside = donor_slice
                .iter()
                .all(|m| !m.is_empty() && placement.transform.stays_inside(m, w, h));
            if inside {
                let copied = propagate_by_copy(&donor_masks, &placement.transform, target.len(), (w, h))?;
                if copied.first_empty().is_none() {
                    variants.push((Propagation::Copied, copied));
                }
            }
            match propagate_by_flow(target, &placement.mask, gateway) {
                Ok(flowed) => variants.push((Propagation::Flowed, flowed)),
                Err(FlowError::EmptyMask { frame }) => {
                    tracing::info!(source = %sid, region = k, frame, "flowed mask vanished");
                }
                Err(e) => return Err(e.into()),
            }
        }

        let t = &placement.transform;
        let mut provenance = BTreeMap::new();
        provenance.insert("source_id".into(), json!(sid));
        provenance.insert("seed".into(), json!(seed));
        provenance.insert("donor_id".into(), json!(donor.id));
        provenance.insert("background_label".into(), json!(region.label));
        provenance.insert("paste_offset".into(), json!([t.offset.0, t.offset.1]));
        provenance.insert("paste_scale".into(), json!(t.scale));

        for (propagation, masks) in variants {
            for &kind in &cfg.aug_kinds {
                let aug = match augment(&masks, kind, region_seed) {
                    Ok(a) => a,
                    Err(e) => {
                        let e = PipelineError::from(e);
                        if is_droppable(&e) {
                            continue;
                        }
                        return Err(e);
                    }
                };
                let suffix = if kind == AugmentationKind::None {
                    String::new()
                } else {
                    format!("-{}", kind.as_str())
                };
                let name = format!("del-r{k}-{}{suffix}", propagation.as_str());
                let rel = PathBuf::from("samples").join(&sid).join(&name);
                let dir = store_sample(out_root, &rel, target, &aug.masks)?;
                let mut prov = provenance.clone();
                if let Some(r) = aug.radius {
                    prov.insert("expand_radius".into(), json!(r));
                }
                records.push(SampleRecord {
                    id: format!("{sid}-{name}"),
                    task: Task::Deletion,
                    frames_ref: frames_ref.to_path_buf(),
                    masks_ref: dir.clone(),
                    masked_ref: Some(dir),
                    caption: DELETION_CAPTION.to_string(),
                    caption_length_class: CaptionLength::Short,
                    augmentation: kind,
                    propagation,
                    entity_label: None,
                    fps: target.fps(),
                    resolution: (w, h),
                    provenance: prov,
                    kive: false,
                });
            }
        }
    }
    Ok(records)
}

/// Runs the deletion pipeline over a corpus and writes `manifest.jsonl` in
/// corpus order. An empty donor pool aborts before any work.
pub fn run_deletion(
    corpus: &[CorpusEntry],
    gateway: &Gateway,
    pool: &DonorPool,
    cfg: &DeletionConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(PathBuf, RunSummary), PipelineError> {
    if pool.is_empty() {
        return Err(PipelineError::EmptyDonorPool);
    }
    std::fs::create_dir_all(out_dir)?;
    let per_source: Vec<Option<Vec<SampleRecord>>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let run = || -> Result<Vec<SampleRecord>, PipelineError> {
                let target = entry.load()?;
                synthesize_deletion_samples(
                    gateway,
                    &target,
                    &entry.frames_dir,
                    pool,
                    cfg,
                    derive_seed(seed, i as u64),
                    out_dir,
                )
            };
            match run() {
                Ok(r) => Some(r),
                Err(e) => {
                    tracing::warn!(source = %entry.frames_dir.display(), error = %e, "source skipped");
                    None
                }
            }
        })
        .collect();
    let summary = RunSummary {
        sources: corpus.len(),
        failed_sources: per_source.iter().filter(|r| r.is_none()).count(),
        records: per_source.iter().flatten().map(Vec::len).sum(),
    };
    let records: Vec<SampleRecord> = per_source.into_iter().flatten().flatten().collect();
    let path = write_manifest(out_dir.join(MANIFEST_FILE), &records)?;
    Ok((path, summary))
}
