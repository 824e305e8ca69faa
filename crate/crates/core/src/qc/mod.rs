//! Human quality control: an append-only verdict log, per-reviewer queues,
//! majority-vote quality statistics and the HTTP service for reviewers.

mod server;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{count_masks, read_manifest, resolve_ref, ModelError, SampleRecord};

pub use server::{qc_router, serve_qc, QcService, SamplePayload};

#[derive(Debug, thiserror::Error)]
pub enum QcError {
    #[error("unknown sample {0:?}")]
    UnknownSample(String),
    #[error("reviewer {reviewer:?} already judged sample {sample:?}")]
    Conflict { sample: String, reviewer: String },
    #[error("sample {sample:?} has {frames} frame(s); mp must be {}", if *.frames > 1 { "present" } else { "absent" })]
    MpPresenceViolation { sample: String, frames: usize },
    #[error("reviewer id must not be empty")]
    EmptyReviewer,
    #[error("verdict log line {line}: {message}")]
    CorruptLog { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One reviewer's judgement of one sample. `mp` is present exactly for
/// multi-frame samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub sample_id: String,
    pub reviewer_id: String,
    pub mg: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mp: Option<bool>,
    pub ta: bool,
    /// Milliseconds since the Unix epoch; stamped on receipt when missing.
    #[serde(default)]
    pub timestamp: Option<u64>,
}

/// Pass rates over reviewed samples. A rate is absent when no reviewed
/// sample is eligible for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityStats {
    pub n_reviewed: usize,
    pub mg_rate: Option<f64>,
    pub mp_rate: Option<f64>,
    pub ta_rate: Option<f64>,
    pub hq_rate: Option<f64>,
}

/// Strict majority; ties fail.
fn majority(votes: impl Iterator<Item = bool>) -> Option<bool> {
    let (mut pass, mut total) = (0usize, 0usize);
    for v in votes {
        total += 1;
        pass += usize::from(v);
    }
    (total > 0).then_some(2 * pass > total)
}

fn rate(passed: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| passed as f64 / total as f64)
}

/// Aggregates verdicts per sample by majority vote. HQ requires MG, TA and,
/// for multi-frame samples, MP. `frames` maps sample id to frame count;
/// verdicts on unknown samples are ignored.
pub fn quality_stats(frames: &HashMap<String, usize>, verdicts: &[VerdictRecord]) -> QualityStats {
    let mut by_sample: BTreeMap<&str, Vec<&VerdictRecord>> = BTreeMap::new();
    for v in verdicts {
        if frames.contains_key(&v.sample_id) {
            by_sample.entry(&v.sample_id).or_default().push(v);
        }
    }
    let (mut mg, mut ta, mut mp, mut mp_total, mut hq) = (0, 0, 0, 0, 0);
    for (id, vs) in &by_sample {
        let g = majority(vs.iter().map(|v| v.mg)).unwrap_or(false);
        let t = majority(vs.iter().map(|v| v.ta)).unwrap_or(false);
        let p = if frames[*id] > 1 {
            mp_total += 1;
            let p = majority(vs.iter().filter_map(|v| v.mp)).unwrap_or(false);
            mp += usize::from(p);
            p
        } else {
            true
        };
        mg += usize::from(g);
        ta += usize::from(t);
        hq += usize::from(g && t && p);
    }
    let n = by_sample.len();
    QualityStats {
        n_reviewed: n,
        mg_rate: rate(mg, n),
        mp_rate: rate(mp, mp_total),
        ta_rate: rate(ta, n),
        hq_rate: rate(hq, n),
    }
}

/// Append-only newline-delimited verdict log, replayed on open.
pub struct VerdictLog {
    path: PathBuf,
    file: File,
    verdicts: Vec<VerdictRecord>,
    keys: HashSet<(String, String)>,
}

impl VerdictLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, QcError> {
        let path = path.as_ref().to_path_buf();
        let mut verdicts = Vec::new();
        let mut keys = HashSet::new();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let v: VerdictRecord = serde_json::from_str(&line).map_err(|e| QcError::CorruptLog {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                keys.insert((v.sample_id.clone(), v.reviewer_id.clone()));
                verdicts.push(v);
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            file,
            verdicts,
            keys,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn verdicts(&self) -> &[VerdictRecord] {
        &self.verdicts
    }

    pub fn has(&self, sample: &str, reviewer: &str) -> bool {
        self.keys.contains(&(sample.to_string(), reviewer.to_string()))
    }

    /// Appends without validation beyond the duplicate check; the line is
    /// flushed to disk before returning.
    pub fn append(&mut self, v: VerdictRecord) -> Result<(), QcError> {
        if self.has(&v.sample_id, &v.reviewer_id) {
            return Err(QcError::Conflict {
                sample: v.sample_id,
                reviewer: v.reviewer_id,
            });
        }
        let mut line = serde_json::to_string(&v).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.keys.insert((v.sample_id.clone(), v.reviewer_id.clone()));
        self.verdicts.push(v);
        Ok(())
    }
}

/// A manifest record under review, with its frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct QcSample {
    pub record: SampleRecord,
    pub frames: usize,
}

/// Review queue over a manifest plus its verdict log.
pub struct QcState {
    base_dir: PathBuf,
    samples: Vec<QcSample>,
    index: HashMap<String, usize>,
    log: VerdictLog,
}

impl QcState {
    /// Frame counts come from each record's mask directory.
    pub fn open(manifest: &Path, verdicts: &Path) -> Result<Self, QcError> {
        let m = read_manifest(manifest)?;
        let base_dir = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut samples = Vec::with_capacity(m.records.len());
        for record in m.records {
            let frames = count_masks(&resolve_ref(&base_dir, &record.masks_ref))?;
            samples.push(QcSample { record, frames });
        }
        Self::from_samples(base_dir, samples, VerdictLog::open(verdicts)?)
    }

    pub fn from_samples(base_dir: PathBuf, samples: Vec<QcSample>, log: VerdictLog) -> Result<Self, QcError> {
        let index = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.record.id.clone(), i))
            .collect();
        Ok(Self {
            base_dir,
            samples,
            index,
            log,
        })
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn samples(&self) -> &[QcSample] {
        &self.samples
    }

    pub fn sample(&self, id: &str) -> Option<&QcSample> {
        self.index.get(id).map(|&i| &self.samples[i])
    }

    pub fn log(&self) -> &VerdictLog {
        &self.log
    }

    /// First sample in manifest order this reviewer has not judged.
    pub fn next_sample(&self, reviewer: &str) -> Option<&QcSample> {
        self.samples.iter().find(|s| !self.log.has(&s.record.id, reviewer))
    }

    pub fn submit(&mut self, mut v: VerdictRecord) -> Result<(), QcError> {
        if v.reviewer_id.trim().is_empty() {
            return Err(QcError::EmptyReviewer);
        }
        let sample = self
            .sample(&v.sample_id)
            .ok_or_else(|| QcError::UnknownSample(v.sample_id.clone()))?;
        if (sample.frames > 1) != v.mp.is_some() {
            return Err(QcError::MpPresenceViolation {
                sample: v.sample_id,
                frames: sample.frames,
            });
        }
        if v.timestamp.is_none() {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64);
            v.timestamp = Some(now);
        }
        self.log.append(v)
    }

    pub fn stats(&self) -> QualityStats {
        let frames = self
            .samples
            .iter()
            .map(|s| (s.record.id.clone(), s.frames))
            .collect();
        quality_stats(&frames, self.log.verdicts())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(sample: &str, reviewer: &str, mg: bool, mp: Option<bool>, ta: bool) -> VerdictRecord {
        VerdictRecord {
            sample_id: sample.into(),
            reviewer_id: reviewer.into(),
            mg,
            mp,
            ta,
            timestamp: Some(0),
        }
    }

    #[test]
    fn majority_ties_fail() {
        assert_eq!(majority([true, false].into_iter()), Some(false));
        assert_eq!(majority([true, true, false].into_iter()), Some(true));
        assert_eq!(majority(std::iter::empty()), None);
    }

    #[test]
    fn empty_log_has_no_rates() {
        let s = quality_stats(&HashMap::new(), &[]);
        assert_eq!(s.n_reviewed, 0);
        assert_eq!(s.hq_rate, None);
    }

    #[test]
    fn mp_only_counts_videos() {
        let frames = HashMap::from([("img".to_string(), 1), ("vid".to_string(), 5)]);
        let s = quality_stats(
            &frames,
            &[v("img", "a", true, None, true), v("vid", "a", true, Some(false), true)],
        );
        assert_eq!(s.mp_rate, Some(0.0));
        assert_eq!(s.mg_rate, Some(1.0));
        assert_eq!(s.hq_rate, Some(0.5));
    }

    #[test]
    fn log_replays_and_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.jsonl");
        let mut log = VerdictLog::open(&path).unwrap();
        log.append(v("s", "a", true, None, true)).unwrap();
        assert!(matches!(
            log.append(v("s", "a", false, None, true)),
            Err(QcError::Conflict { .. })
        ));
        log.append(v("s", "b", false, None, true)).unwrap();
        drop(log);
        let replayed = VerdictLog::open(&path).unwrap();
        assert_eq!(replayed.verdicts().len(), 2);
        assert!(replayed.has("s", "b"));
    }

    proptest! {
        #[test]
        fn hq_never_exceeds_a_dimension(
            votes in proptest::collection::vec((0usize..6, 0usize..3, any::<bool>(), any::<bool>(), any::<bool>()), 0..60)
        ) {
            let frames: HashMap<String, usize> =
                (0..6).map(|i| (format!("s{i}"), if i % 2 == 0 { 1 } else { 4 })).collect();
            let mut seen = HashSet::new();
            let verdicts: Vec<VerdictRecord> = votes
                .into_iter()
                .filter(|(s, r, ..)| seen.insert((*s, *r)))
                .map(|(s, r, mg, mp, ta)| {
                    let mp = (s % 2 == 1).then_some(mp);
                    v(&format!("s{s}"), &format!("r{r}"), mg, mp, ta)
                })
                .collect();
            let st = quality_stats(&frames, &verdicts);
            if let Some(hq) = st.hq_rate {
                prop_assert!(hq <= st.mg_rate.unwrap() && hq <= st.ta_rate.unwrap());
                if let Some(mp) = st.mp_rate {
                    // MP is measured over the video subset only; compare counts.
                    let videos = verdicts.iter().filter(|v| v.mp.is_some()).map(|v| &v.sample_id).collect::<HashSet<_>>().len();
                    prop_assert!(hq * st.n_reviewed as f64 <= mp * videos as f64 + (st.n_reviewed - videos) as f64 + 1e-9);
                }
            }
        }
    }
}
