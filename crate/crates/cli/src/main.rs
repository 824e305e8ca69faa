//! `vivid-forge`: builds editing datasets from raw corpora, plans training
//! batches, prepares keyframe-guided inputs, evaluates edits and serves the
//! quality-control UI.

mod build;
mod inspect;
mod kive;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use vivid_forge_core::perception::{BackendsConfig, Gateway};

#[derive(Parser)]
#[command(name = "vivid-forge", version, about)]
struct Cli {
    /// Worker threads for pipeline and evaluation runs (default: logical CPUs).
    #[arg(long, global = true, env = "VIVID_FORGE_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract frames from a media file (or check an existing frame
    /// directory) and validate resolution and duration.
    Ingest(build::IngestArgs),
    /// Run the addition/modification pipeline over a corpus listing.
    BuildAddmod(build::AddmodArgs),
    /// Run the deletion pipeline, drawing donor masks from an addmod manifest.
    BuildDel(build::DeletionArgs),
    /// Re-run mask augmentation over an existing manifest.
    Augment(build::AugmentArgs),
    /// Write a training batch plan.
    PlanBatches(inspect::PlanArgs),
    /// Keyframe-guided editing helpers.
    #[command(subcommand)]
    Kive(kive::KiveCommand),
    /// Compute BP / TC / TA over records that carry an edited video.
    Eval(inspect::EvalArgs),
    /// Record counts per task, sources and distinct entity labels.
    Stats(inspect::StatsArgs),
    /// Serve the quality-control API and reviewer UI.
    ServeQc(serve::ServeQcArgs),
    /// Write a synthetic corpus that the mock backend understands.
    SynthCorpus(build::SynthArgs),
    /// Serve the deterministic mock perception backend over stdio or HTTP.
    MockBackend(serve::MockBackendArgs),
}

/// Backend configuration: the TOML file if given (roles left out use the
/// mock), then environment overrides.
fn gateway(backends: Option<&PathBuf>) -> Result<Gateway> {
    let cfg = match backends {
        Some(p) => BackendsConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => BackendsConfig::all_mock(),
    };
    Ok(Gateway::new(&cfg.with_env_overrides()?)?)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Ingest(a) => build::ingest(a),
        Command::BuildAddmod(a) => build::addmod(a),
        Command::BuildDel(a) => build::deletion(a),
        Command::Augment(a) => build::augment(a),
        Command::PlanBatches(a) => inspect::plan(a),
        Command::Kive(c) => kive::run(c),
        Command::Eval(a) => inspect::eval(a),
        Command::Stats(a) => inspect::stats(a),
        Command::ServeQc(a) => serve::serve_qc(a),
        Command::SynthCorpus(a) => build::synth(a),
        Command::MockBackend(a) => serve::mock_backend(a),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
