use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;
use vivid_forge_core::fixtures::{synth_corpus, SynthConfig};
use vivid_forge_core::geometry::{area_filter, augment as augment_masks, AreaFilterConfig, AugmentationKind};
use vivid_forge_core::model::{load_frames, load_masks, read_manifest, resolve_ref, write_manifest, Fps, SampleRecord};
use vivid_forge_core::pipeline::{
    check_source, derive_seed, read_corpus_listing, run_addmod, run_deletion, store_sample, AddmodConfig,
    DeletionConfig, DonorPool, MANIFEST_FILE,
};

use crate::gateway;

#[derive(Args)]
pub struct IngestArgs {
    /// Media file to extract, or an existing frame directory when no
    /// extraction command is configured.
    input: PathBuf,
    /// Destination frame directory (required with --extract-cmd).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shell template; `{input}` and `{output}` are replaced by quoted paths.
    /// It must write frame_00000.png, frame_00001.png, ... into `{output}`.
    #[arg(long, env = "VIVID_FORGE_EXTRACT_CMD")]
    extract_cmd: Option<String>,
    /// Frame rate, as an integer or a ratio such as 30000/1001.
    #[arg(long)]
    fps: Fps,
    /// Reject sources that fail the resolution or duration check.
    #[arg(long)]
    strict: bool,
    /// Append `<dir> <fps>` to this corpus listing when the source is accepted.
    #[arg(long)]
    listing: Option<PathBuf>,
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let frames_dir = match &a.extract_cmd {
        Some(template) => {
            let out = a.out.as_ref().context("--out is required with --extract-cmd")?;
            std::fs::create_dir_all(out)?;
            let cmd = template
                .replace("{input}", &shell_quote(&a.input))
                .replace("{output}", &shell_quote(out));
            let status = Command::new("sh")
                .arg("-c")
                .arg(&cmd)
                .status()
                .with_context(|| format!("running `{cmd}`"))?;
            if !status.success() {
                bail!("frame extraction failed ({status})");
            }
            out.clone()
        }
        None => a.input.clone(),
    };
    let check = check_source(&frames_dir, a.fps)?;
    println!(
        "{}: {} frame(s), {}x{}, {:.2} s",
        frames_dir.display(),
        check.frames,
        check.width,
        check.height,
        check.duration_secs
    );
    for p in &check.problems {
        if a.strict {
            eprintln!("rejected: {p}");
        } else {
            eprintln!("warning: {p}");
        }
    }
    if a.strict && !check.passed() {
        bail!("source rejected");
    }
    if let Some(listing) = &a.listing {
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(listing)?;
        writeln!(f, "{} {}", std::path::absolute(&frames_dir)?.display(), a.fps)?;
    }
    Ok(())
}

fn parse_kinds(list: &str) -> Result<Vec<AugmentationKind>> {
    list.split(',')
        .map(|k| k.trim().parse().map_err(anyhow::Error::msg))
        .collect()
}

#[derive(Args)]
pub struct AddmodArgs {
    /// Corpus listing: one `<frames_dir> <fps>` per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for manifest.jsonl and sample directories.
    #[arg(long)]
    out: PathBuf,
    /// Backend configuration (TOML). Defaults to the built-in mock.
    #[arg(long)]
    backends: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    max_entities: usize,
    /// Comma-separated augmentation kinds.
    #[arg(long, default_value = "none,expand,hull,box,hull_expand,box_expand")]
    aug: String,
}

pub fn addmod(a: AddmodArgs) -> Result<()> {
    let corpus = read_corpus_listing(&a.corpus)?;
    let cfg = AddmodConfig {
        max_entities: a.max_entities,
        aug_kinds: parse_kinds(&a.aug)?,
        ..AddmodConfig::default()
    };
    let (path, summary) = run_addmod(&corpus, &gateway(a.backends.as_ref())?, &cfg, a.seed, &a.out)?;
    println!(
        "{} records from {} sources ({} failed) -> {}",
        summary.records,
        summary.sources,
        summary.failed_sources,
        path.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct DeletionArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Addition/modification manifest providing donor masks.
    #[arg(long)]
    donors: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    backends: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also emit every augmentation of each deletion mask.
    #[arg(long)]
    augment: bool,
}

pub fn deletion(a: DeletionArgs) -> Result<()> {
    let corpus = read_corpus_listing(&a.corpus)?;
    let pool = DonorPool::from_manifest(&a.donors)?;
    let mut cfg = DeletionConfig::default();
    if a.augment {
        cfg.aug_kinds = AugmentationKind::ALL.to_vec();
    }
    let (path, summary) = run_deletion(&corpus, &gateway(a.backends.as_ref())?, &pool, &cfg, a.seed, &a.out)?;
    println!(
        "{} records from {} sources ({} failed), {} donors -> {}",
        summary.records,
        summary.sources,
        summary.failed_sources,
        pool.donors.len(),
        path.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct AugmentArgs {
    /// Manifest whose un-augmented records are augmented.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "expand,hull,box,hull_expand,box_expand")]
    kinds: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn absolute(base: &Path, r: &Path) -> Result<PathBuf> {
    Ok(std::path::absolute(resolve_ref(base, r))?)
}

/// Writes a complete manifest: the original un-augmented records (with
/// absolute references) followed by each surviving augmentation.
pub fn augment(a: AugmentArgs) -> Result<()> {
    let kinds = parse_kinds(&a.kinds)?;
    let manifest = read_manifest(&a.manifest)?;
    let base = a.manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let area = AreaFilterConfig::default();

    let mut groups: BTreeMap<PathBuf, Vec<&SampleRecord>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in manifest.records.iter().filter(|r| r.augmentation == AugmentationKind::None) {
        if !groups.contains_key(&r.masks_ref) {
            order.push(r.masks_ref.clone());
        }
        groups.entry(r.masks_ref.clone()).or_default().push(r);
    }

    std::fs::create_dir_all(&a.out)?;
    let mut out = Vec::new();
    for (gi, key) in order.iter().enumerate() {
        let group = &groups[key];
        let first = group[0];
        let masks = load_masks(&resolve_ref(&base, &first.masks_ref))?;
        let frames_dir = absolute(&base, &first.frames_ref)?;
        let frames = load_frames(&frames_dir, first.fps, first.source_id().unwrap_or(&first.id))?;
        for r in group {
            let mut copy = (*r).clone();
            copy.frames_ref = absolute(&base, &r.frames_ref)?;
            copy.masks_ref = absolute(&base, &r.masks_ref)?;
            copy.masked_ref = r.masked_ref.as_ref().map(|m| absolute(&base, m)).transpose()?;
            out.push(copy);
        }
        let seed = derive_seed(a.seed, gi as u64);
        for &kind in kinds.iter().filter(|k| **k != AugmentationKind::None) {
            let aug = match augment_masks(&masks, kind, seed) {
                Ok(x) => x,
                Err(e) => {
                    tracing::warn!(masks = %key.display(), kind = %kind, error = %e, "augmentation failed");
                    continue;
                }
            };
            if !area_filter(&aug.masks, &area) {
                continue;
            }
            let name = key.display().to_string().replace(['/', '\\'], "_");
            let rel = PathBuf::from("augmented").join(name).join(kind.as_str());
            let dir = store_sample(&a.out, &rel, &frames, &aug.masks)?;
            for r in group {
                let mut rec = (*r).clone();
                rec.id = if r.id.contains("-none-") {
                    r.id.replacen("-none-", &format!("-{}-", kind.as_str()), 1)
                } else {
                    format!("{}-{}", r.id, kind.as_str())
                };
                rec.augmentation = kind;
                rec.frames_ref = frames_dir.clone();
                rec.masks_ref = dir.clone();
                rec.masked_ref = Some(dir.clone());
                rec.provenance.insert("augmented_from".into(), json!(r.id));
                rec.provenance.insert("seed".into(), json!(a.seed));
                if let Some(radius) = aug.radius {
                    rec.provenance.insert("expand_radius".into(), json!(radius));
                }
                out.push(rec);
            }
        }
    }
    let path = write_manifest(a.out.join(MANIFEST_FILE), &out)?;
    println!("{} records -> {}", out.len(), path.display());
    Ok(())
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    videos: usize,
    #[arg(long, default_value_t = 2)]
    images: usize,
    #[arg(long, default_value_t = 96)]
    width: u32,
    #[arg(long, default_value_t = 64)]
    height: u32,
    #[arg(long, default_value_t = 8)]
    frames: usize,
    #[arg(long, default_value_t = 8)]
    fps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    if a.width < 48 || a.height < 32 || a.frames == 0 || a.fps == 0 {
        bail!("synthetic sources need at least 48x32 pixels, 1 frame and a positive fps");
    }
    let cfg = SynthConfig {
        videos: a.videos,
        images: a.images,
        width: a.width,
        height: a.height,
        frames: a.frames,
        fps: a.fps,
    };
    let listing = synth_corpus(&a.out, &cfg, a.seed)?;
    println!("{}", listing.display());
    Ok(())
}
