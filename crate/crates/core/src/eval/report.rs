use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    background_preservation, downsample_fps, downsample_masks, temporal_consistency, text_alignment,
    EvalError, FrameEmbedder, RegionScorer,
};
use crate::model::{load_frames, load_masks, resolve_ref, EvalRecord, FrameSequence, MaskSequence, Task};

pub const BP_NORMALIZATION: &str =
    "BP = mean absolute difference over all non-mask pixel channels, 0-255 scale";

/// Metrics at one frame rate. TC is absent for single-frame clips, TA for
/// deletion records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub tc: Option<f64>,
    pub ta: Option<f64>,
    pub bp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordMetrics {
    pub id: String,
    pub task: Task,
    pub native: Metrics,
    pub downsampled: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskSummary {
    pub task: Task,
    pub rate: &'static str,
    pub records: usize,
    pub tc: Option<f64>,
    pub ta: Option<f64>,
    pub bp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub fps_factor: u32,
    pub bp_normalization: &'static str,
    pub summary: Vec<TaskSummary>,
    pub records: Vec<RecordMetrics>,
    pub failures: Vec<RecordFailure>,
}

fn metrics_at(
    original: &FrameSequence,
    edited: &FrameSequence,
    masks: &MaskSequence,
    caption: Option<&str>,
    embedder: &dyn FrameEmbedder,
    scorer: &dyn RegionScorer,
) -> Result<Metrics, EvalError> {
    let tc = match temporal_consistency(edited, embedder) {
        Ok(v) => Some(v),
        Err(EvalError::TooFewFrames { .. }) => None,
        Err(e) => return Err(e),
    };
    let ta = match caption {
        Some(c) => Some(text_alignment(edited, masks, c, scorer)?),
        None => None,
    };
    Ok(Metrics {
        tc,
        ta,
        bp: background_preservation(original, edited, masks)?,
    })
}

fn evaluate(
    record: &EvalRecord,
    base: &Path,
    embedder: &dyn FrameEmbedder,
    scorer: &dyn RegionScorer,
    factor: u32,
) -> Result<RecordMetrics, String> {
    let s = &record.sample;
    let edited_ref = record.edited_ref.as_ref().ok_or("missing edited_ref")?;
    let source = s.source_id().unwrap_or(&s.id).to_string();
    let run = || -> Result<RecordMetrics, EvalError> {
        let original = load_frames(&resolve_ref(base, &s.frames_ref), s.fps, source.clone())?;
        let edited = load_frames(&resolve_ref(base, edited_ref), s.fps, source.clone())?;
        let masks = load_masks(&resolve_ref(base, &s.masks_ref))?;
        let caption = (s.task != Task::Deletion).then_some(s.caption.as_str());
        let native = metrics_at(&original, &edited, &masks, caption, embedder, scorer)?;
        let downsampled = metrics_at(
            &downsample_fps(&original, factor)?,
            &downsample_fps(&edited, factor)?,
            &downsample_masks(&masks, factor)?,
            caption,
            embedder,
            scorer,
        )?;
        Ok(RecordMetrics {
            id: s.id.clone(),
            task: s.task,
            native,
            downsampled,
        })
    };
    run().map_err(|e| e.to_string())
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(records: &[RecordMetrics]) -> Vec<TaskSummary> {
    let mut by_task: BTreeMap<Task, Vec<&RecordMetrics>> = BTreeMap::new();
    for r in records {
        by_task.entry(r.task).or_default().push(r);
    }
    let mut out = Vec::new();
    for (task, rows) in by_task {
        for rate in ["native", "downsampled"] {
            let pick = |r: &&RecordMetrics| -> Metrics {
                if rate == "native" {
                    r.native.clone()
                } else {
                    r.downsampled.clone()
                }
            };
            let ms: Vec<Metrics> = rows.iter().map(pick).collect();
            out.push(TaskSummary {
                task,
                rate,
                records: ms.len(),
                tc: mean(ms.iter().map(|m| m.tc)),
                ta: mean(ms.iter().map(|m| m.ta)),
                bp: mean(ms.iter().map(|m| Some(m.bp))),
            });
        }
    }
    out
}

/// Evaluates every record (in parallel) at the native rate and after keeping
/// every `fps_factor`-th frame. Failing records are listed, not fatal.
/// Relative paths resolve against `base`.
pub fn eval_report(
    records: &[EvalRecord],
    base: &Path,
    embedder: &dyn FrameEmbedder,
    scorer: &dyn RegionScorer,
    fps_factor: u32,
) -> Result<EvalReport, EvalError> {
    if fps_factor == 0 {
        return Err(EvalError::InvalidFactor);
    }
    let results: Vec<Result<RecordMetrics, RecordFailure>> = records
        .par_iter()
        .map(|r| {
            evaluate(r, base, embedder, scorer, fps_factor).map_err(|error| RecordFailure {
                id: r.sample.id.clone(),
                error,
            })
        })
        .collect();
    let mut ok = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(m) => ok.push(m),
            Err(f) => failures.push(f),
        }
    }
    Ok(EvalReport {
        fps_factor,
        bp_normalization: BP_NORMALIZATION,
        summary: summarize(&ok),
        records: ok,
        failures,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

impl EvalReport {
    /// Aligned text table with one row per (task, rate).
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:<12} {:>7} {:>8} {:>8} {:>8}",
            "task", "rate", "records", "TC↑", "TA↑", "BP↓"
        );
        for s in &self.summary {
            let rate = if s.rate == "native" {
                "native".to_string()
            } else {
                format!("1/{}", self.fps_factor)
            };
            let _ = writeln!(
                out,
                "{:<22} {:<12} {:>7} {:>8} {:>8} {:>8}",
                s.task.as_str(),
                rate,
                s.records,
                cell(s.tc),
                cell(s.ta),
                cell(s.bp)
            );
        }
        let _ = writeln!(out, "{}", self.bp_normalization);
        if !self.failures.is_empty() {
            let _ = writeln!(out, "{} record(s) failed:", self.failures.len());
            for f in &self.failures {
                let _ = writeln!(out, "  {}: {}", f.id, f.error);
            }
        }
        out
    }

    /// Writes the table to `table` and the full report as JSON to `json`.
    pub fn write(&self, table: &Path, json: &Path) -> std::io::Result<()> {
        std::fs::write(table, self.render_table())?;
        let body = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(json, body + "\n")
    }
}
