use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use super::{derive_seed, select_entities, store_sample, CorpusEntry, PipelineError, Region, MANIFEST_FILE};
use crate::geometry::{area_filter, augment, crop_entity, AreaFilterConfig, AugmentationKind};
use crate::model::{write_manifest, FrameSequence, MaskSequence, Propagation, SampleRecord, Task};
use crate::perception::{CaptionTriplet, Gateway, VocabularyConfig};

#[derive(Debug, Clone)]
pub struct AddmodConfig {
    pub vocab: VocabularyConfig,
    pub area: AreaFilterConfig,
    pub max_entities: usize,
    pub aug_kinds: Vec<AugmentationKind>,
}

impl Default for AddmodConfig {
    fn default() -> Self {
        Self {
            vocab: VocabularyConfig::default(),
            area: AreaFilterConfig::default(),
            max_entities: super::DEFAULT_MAX_ENTITIES,
            aug_kinds: AugmentationKind::ALL.to_vec(),
        }
    }
}

struct Entity {
    index: usize,
    region: Region,
    masks: MaskSequence,
    captions: CaptionTriplet,
}

fn prepare_entity(
    gateway: &Gateway,
    source: &FrameSequence,
    index: usize,
    region: Region,
) -> Result<Option<Entity>, PipelineError> {
    let masks = if source.is_image() {
        MaskSequence::new(vec![region.mask.clone()])?
    } else {
        let tracked = gateway.propagate_mask(source.frames(), &region.mask)?;
        if let Some(frame) = tracked.iter().position(|m| m.is_empty()) {
            tracing::warn!(
                source = source.source_id(),
                entity = index,
                frame,
                "tracked mask vanished; entity discarded"
            );
            return Ok(None);
        }
        MaskSequence::new(tracked)?
    };
    let crops = crop_entity(source, &masks)?;
    let captions = gateway.caption_entity(crops.frames(), &region.label)?;
    Ok(Some(Entity {
        index,
        region,
        masks,
        captions,
    }))
}

/// Records for one source: per entity, 3 captions × every augmentation kind
/// that survives the area filter. Sample directories are written under
/// `out_root`; `frames_ref` is stored verbatim in each record.
pub fn build_addmod_samples(
    gateway: &Gateway,
    source: &FrameSequence,
    frames_ref: &Path,
    cfg: &AddmodConfig,
    seed: u64,
    out_root: &Path,
) -> Result<Vec<SampleRecord>, PipelineError> {
    let sid = source.source_id().to_string();
    let regions = select_entities(gateway, &source.frames()[0], &cfg.vocab, &cfg.area, cfg.max_entities)?;
    let mut records = Vec::new();
    for (index, region) in regions.into_iter().enumerate() {
        let entity = match prepare_entity(gateway, source, index, region) {
            Ok(Some(e)) => e,
            Ok(None) => continue,
            Err(e) => {
                tracing::warn!(source = %sid, entity = index, error = %e, "entity skipped");
                continue;
            }
        };
        let entity_seed = derive_seed(seed, entity.index as u64);
        for &kind in &cfg.aug_kinds {
            let aug = match augment(&entity.masks, kind, entity_seed) {
                Ok(a) => a,
                Err(e) => {
                    tracing::warn!(source = %sid, entity = index, kind = %kind, error = %e, "augmentation failed");
                    continue;
                }
            };
            if !area_filter(&aug.masks, &cfg.area) {
                continue;
            }
            let rel = PathBuf::from("samples")
                .join(&sid)
                .join(format!("am-e{}-{}", entity.index, kind.as_str()));
            let dir = store_sample(out_root, &rel, source, &aug.masks)?;
            let mut provenance = BTreeMap::new();
            provenance.insert("source_id".into(), json!(sid));
            provenance.insert("seed".into(), json!(seed));
            provenance.insert("entity_index".into(), json!(entity.index));
            provenance.insert("entity_score".into(), json!(entity.region.score));
            if let Some(r) = aug.radius {
                provenance.insert("expand_radius".into(), json!(r));
            }
            for (length, caption) in entity.captions.iter() {
                records.push(SampleRecord {
                    id: format!("{sid}-am-e{}-{}-{}", entity.index, kind.as_str(), length.as_str()),
                    task: Task::AdditionModification,
                    frames_ref: frames_ref.to_path_buf(),
                    masks_ref: dir.clone(),
                    masked_ref: Some(dir.clone()),
                    caption: caption.to_string(),
                    caption_length_class: length,
                    augmentation: kind,
                    propagation: Propagation::Tracked,
                    entity_label: Some(entity.region.label.clone()),
                    fps: source.fps(),
                    resolution: source.resolution(),
                    provenance: provenance.clone(),
                    kive: false,
                });
            }
        }
    }
    Ok(records)
}

/// Totals of a pipeline run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub sources: usize,
    pub failed_sources: usize,
    pub records: usize,
}

/// Runs the addition/modification pipeline over a corpus, one rayon task per
/// source, and writes `manifest.jsonl` in corpus order.
pub fn run_addmod(
    corpus: &[CorpusEntry],
    gateway: &Gateway,
    cfg: &AddmodConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<(PathBuf, RunSummary), PipelineError> {
    std::fs::create_dir_all(out_dir)?;
    let per_source: Vec<Option<Vec<SampleRecord>>> = corpus
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let run = || -> Result<Vec<SampleRecord>, PipelineError> {
                let source = entry.load()?;
                build_addmod_samples(gateway, &source, &entry.frames_dir, cfg, derive_seed(seed, i as u64), out_dir)
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
