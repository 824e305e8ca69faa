use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use vivid_forge_core::eval::{eval_report, BuiltinEmbedder, FrameEmbedder};
use vivid_forge_core::model::{read_eval_records, read_manifest, DatasetStats, SampleRecord};
use vivid_forge_core::sampler::{plan_batches, SamplerConfig};

use crate::gateway;

#[derive(Args)]
pub struct PlanArgs {
    /// Manifests of image samples; repeat to merge several.
    #[arg(long)]
    images: Vec<PathBuf>,
    /// Manifests of video samples; repeat to merge several.
    #[arg(long)]
    videos: Vec<PathBuf>,
    /// Output JSONL: a config header, then one batch per line.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    batches: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    image_ratio: u32,
    #[arg(long, default_value_t = 1)]
    video_ratio: u32,
    #[arg(long, default_value_t = 3)]
    addmod_weight: u32,
    #[arg(long, default_value_t = 1)]
    del_weight: u32,
    #[arg(long, default_value_t = 0.5)]
    kive_prob: f64,
    /// Fixed image/video cycle instead of a random modality draw.
    #[arg(long)]
    strict_cycle: bool,
}

fn records(paths: &[PathBuf]) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_manifest(p).with_context(|| p.display().to_string())?.records);
    }
    Ok(out)
}

pub fn plan(a: PlanArgs) -> Result<()> {
    let cfg = SamplerConfig {
        n_batches: a.batches,
        batch_size: a.batch_size,
        seed: a.seed,
        image_ratio: a.image_ratio,
        video_ratio: a.video_ratio,
        addmod_weight: a.addmod_weight,
        del_weight: a.del_weight,
        kive_prob: a.kive_prob,
        strict_cycle: a.strict_cycle,
    };
    let plan = plan_batches(&records(&a.images)?, &records(&a.videos)?, &cfg)?;
    plan.write_jsonl(&a.out)?;
    let kive = plan.batches.iter().filter(|b| b.kive).count();
    println!(
        "{} batches ({} image, {} video, {} kive) -> {}",
        plan.batches.len(),
        plan.image_batches(),
        plan.batches.len() - plan.image_batches(),
        kive,
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    /// Manifest of records to score; `edited_ref` points at edited frames.
    #[arg(long)]
    manifest: PathBuf,
    /// Receives report.txt and report.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    fps_factor: u32,
    #[arg(long)]
    backends: Option<PathBuf>,
    /// Use the built-in thumbnail embedder instead of the embed backend.
    #[arg(long)]
    builtin_embedder: bool,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let records = read_eval_records(&a.manifest)?;
    let base = a.manifest.parent().unwrap_or(Path::new(""));
    let gw = gateway(a.backends.as_ref())?;
    let embedder: &dyn FrameEmbedder = if a.builtin_embedder { &BuiltinEmbedder } else { &gw };
    let report = eval_report(&records, base, embedder, &gw, a.fps_factor)?;
    std::fs::create_dir_all(&a.out_dir)?;
    report
        .write(&a.out_dir.join("report.txt"), &a.out_dir.join("report.json"))
        .context("writing report")?;
    print!("{}", report.render_table());
    Ok(())
}

#[derive(Args)]
pub struct StatsArgs {
    /// One or more manifests; counts are summed.
    #[arg(long = "manifest", required = true)]
    manifests: Vec<PathBuf>,
    #[arg(long)]
    json: bool,
}

pub fn stats(a: StatsArgs) -> Result<()> {
    let mut all = Vec::new();
    for m in &a.manifests {
        all.extend(read_manifest(m).with_context(|| m.display().to_string())?.records);
    }
    let manifest = vivid_forge_core::model::Manifest::new(all)?;
    let s: DatasetStats = manifest.stats();
    if a.json {
        println!("{}", serde_json::to_string_pretty(&s)?);
        return Ok(());
    }
    println!("{:<24} {:>10}", "task", "samples");
    println!("{:<24} {:>10}", "addition/modification", s.addition_modification);
    println!("{:<24} {:>10}", "deletion", s.deletion);
    println!("{:<24} {:>10}", "total", s.addition_modification + s.deletion);
    println!("sources: {}  entity labels: {}", s.sources, s.entity_labels);
    Ok(())
}
