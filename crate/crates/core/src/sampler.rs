//! Deterministic training batch plans: homogeneous image or video batches,
//! a per-sample task draw, and a keyframe-guidance flag on video batches.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{SampleRecord, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    Video,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Video => "video",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("no {} samples for task {}", .0.as_str(), .1.as_str())]
    EmptyPool(Modality, Task),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_batches: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub image_ratio: u32,
    pub video_ratio: u32,
    pub addmod_weight: u32,
    pub del_weight: u32,
    pub kive_prob: f64,
    /// Replace the random modality draw with a fixed cycle of
    /// `image_ratio` image batches then `video_ratio` video batches.
    pub strict_cycle: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_batches: 1000,
            batch_size: 8,
            seed: 0,
            image_ratio: 10,
            video_ratio: 1,
            addmod_weight: 3,
            del_weight: 1,
            kive_prob: 0.5,
            strict_cycle: false,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.image_ratio + self.video_ratio == 0 {
            return bad("image and video ratios cannot both be zero");
        }
        if self.addmod_weight + self.del_weight == 0 {
            return bad("task weights cannot both be zero");
        }
        if !(0.0..=1.0).contains(&self.kive_prob) {
            return bad("kive probability must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub index: usize,
    pub modality: Modality,
    pub sample_ids: Vec<String>,
    pub tasks: Vec<Task>,
    /// Always false for image batches.
    pub kive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub config: SamplerConfig,
    pub batches: Vec<Batch>,
}

/// Reshuffled whenever it runs dry, so demand beyond the pool size samples
/// with replacement across passes.
struct CyclicPool {
    ids: Vec<String>,
    cursor: usize,
}

impl CyclicPool {
    fn new(ids: Vec<String>, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self {
            ids,
            cursor: 0,
        };
        p.ids.shuffle(rng);
        p
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> String {
        if self.cursor == self.ids.len() {
            self.ids.shuffle(rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.ids[self.cursor - 1].clone()
    }
}

fn ids_for(records: &[SampleRecord], task: Task) -> Vec<String> {
    records.iter().filter(|r| r.task == task).map(|r| r.id.clone()).collect()
}

pub fn plan_batches(
    images: &[SampleRecord],
    videos: &[SampleRecord],
    cfg: &SamplerConfig,
) -> Result<BatchPlan, SamplerError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pools: Vec<(Modality, Task, Option<CyclicPool>)> = Vec::new();
    for (modality, records, ratio) in [
        (Modality::Image, images, cfg.image_ratio),
        (Modality::Video, videos, cfg.video_ratio),
    ] {
        for (task, weight) in [
            (Task::AdditionModification, cfg.addmod_weight),
            (Task::Deletion, cfg.del_weight),
        ] {
            let ids = ids_for(records, task);
            let needed = ratio > 0 && weight > 0 && cfg.n_batches > 0;
            if needed && ids.is_empty() {
                return Err(SamplerError::EmptyPool(modality, task));
            }
            let pool = (!ids.is_empty()).then(|| CyclicPool::new(ids, &mut rng));
            pools.push((modality, task, pool));
        }
    }
    let p_image = f64::from(cfg.image_ratio) / f64::from(cfg.image_ratio + cfg.video_ratio);
    let p_addmod = f64::from(cfg.addmod_weight) / f64::from(cfg.addmod_weight + cfg.del_weight);
    let cycle = (cfg.image_ratio + cfg.video_ratio) as usize;

    let mut batches = Vec::with_capacity(cfg.n_batches);
    for index in 0..cfg.n_batches {
        let modality = if cfg.strict_cycle {
            if index % cycle < cfg.image_ratio as usize {
                Modality::Image
            } else {
                Modality::Video
            }
        } else if rng.random_bool(p_image) {
            Modality::Image
        } else {
            Modality::Video
        };
        let mut sample_ids = Vec::with_capacity(cfg.batch_size);
        let mut tasks = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let task = if rng.random_bool(p_addmod) {
                Task::AdditionModification
            } else {
                Task::Deletion
            };
            let pool = pools
                .iter_mut()
                .find(|(m, t, _)| *m == modality && *t == task)
                .and_then(|(_, _, p)| p.as_mut())
                .ok_or(SamplerError::EmptyPool(modality, task))?;
            sample_ids.push(pool.draw(&mut rng));
            tasks.push(task);
        }
        let kive = modality == Modality::Video && rng.random_bool(cfg.kive_prob);
        batches.push(Batch {
            index,
            modality,
            sample_ids,
            tasks,
            kive,
        });
    }
    Ok(BatchPlan {
        config: *cfg,
        batches,
    })
}

impl BatchPlan {
    /// Newline-delimited JSON: a header line with the configuration, then one
    /// batch per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<(), SamplerError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut out, &serde_json::json!({ "config": self.config }))
            .map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
        for b in &self.batches {
            serde_json::to_writer(&mut out, b).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn image_batches(&self) -> usize {
        self.batches.iter().filter(|b| b.modality == Modality::Image).count()
    }
}
