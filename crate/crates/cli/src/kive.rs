use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use serde_json::json;
use vivid_forge_core::kive::{
    assemble_kive_conditional, chain_long_video, editing_cost, write_kive_conditional, CostModel, EditMode,
    DEFAULT_CLIP_LENGTH,
};
use vivid_forge_core::model::{load_frames, load_masks, read_manifest, resolve_ref, ManifestWriter};
use vivid_forge_core::pipeline::MANIFEST_FILE;

#[derive(Subcommand)]
pub enum KiveCommand {
    /// Build the keyframe-conditioned input for one manifest record.
    Assemble {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        id: String,
        /// Edited keyframe PNG; defaults to the source's first frame.
        #[arg(long)]
        keyframe: Option<PathBuf>,
        /// Receives `<id>-kive/` and an appended manifest.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the overlapping clip boundaries for a long video.
    Chain {
        #[arg(long)]
        frames: usize,
        #[arg(long, default_value_t = DEFAULT_CLIP_LENGTH)]
        clip_length: usize,
    },
    /// Compare editing cost with and without keyframe guidance.
    Cost {
        #[arg(long)]
        attempts: u32,
        #[arg(long, default_value_t = 1.5)]
        c_im: f64,
        #[arg(long, default_value_t = 17.1)]
        c_vid: f64,
    },
}

pub fn run(cmd: KiveCommand) -> Result<()> {
    match cmd {
        KiveCommand::Assemble {
            manifest,
            id,
            keyframe,
            out,
        } => assemble(&manifest, &id, keyframe.as_deref(), &out),
        KiveCommand::Chain { frames, clip_length } => {
            let chain = chain_long_video(frames, clip_length)?;
            for (i, (s, e)) in chain.clips.iter().enumerate() {
                let key = if i == 0 { "source" } else { "previous clip" };
                println!("clip {i}: frames {s}..={e} (keyframe from {key})");
            }
            Ok(())
        }
        KiveCommand::Cost { attempts, c_im, c_vid } => {
            let cm = CostModel::new(c_im, c_vid)?;
            let direct = editing_cost(attempts, EditMode::Direct, &cm)?;
            let kive = editing_cost(attempts, EditMode::Kive, &cm)?;
            println!("direct: {direct:.2} PFLOPs");
            println!("kive:   {kive:.2} PFLOPs");
            Ok(())
        }
    }
}

fn assemble(manifest: &Path, id: &str, keyframe: Option<&Path>, out: &Path) -> Result<()> {
    let m = read_manifest(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new(""));
    let Some(record) = m.get(id) else {
        bail!("no record {id:?} in {}", manifest.display());
    };
    let frames_dir = std::path::absolute(resolve_ref(base, &record.frames_ref))?;
    let source = load_frames(&frames_dir, record.fps, record.source_id().unwrap_or(id))?;
    let masks = load_masks(&resolve_ref(base, &record.masks_ref))?;
    let key = match keyframe {
        Some(p) => image::open(p).with_context(|| p.display().to_string())?.to_rgb8(),
        None => source.frames()[0].clone(),
    };
    let cond = assemble_kive_conditional(&source, &masks, &key, &record.caption)?;
    let new_id = format!("{id}-kive");
    let dir = std::path::absolute(out.join(&new_id))?;
    write_kive_conditional(&dir, &cond)?;

    let mut rec = record.clone();
    rec.id = new_id;
    rec.kive = true;
    rec.frames_ref = frames_dir;
    rec.masks_ref = dir.clone();
    rec.masked_ref = Some(dir.clone());
    rec.provenance.insert("kive_of".into(), json!(id));
    if let Some(p) = keyframe {
        rec.provenance.insert("keyframe".into(), json!(p.display().to_string()));
    }
    let mut writer = ManifestWriter::open_append(out.join(MANIFEST_FILE))?;
    writer.append(&rec)?;
    let path = writer.finish()?;
    println!("{} -> {}", dir.display(), path.display());
    Ok(())
}
