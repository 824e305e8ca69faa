use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{EvalRecord, ModelError, Result, SampleRecord, Task, SCHEMA_VERSION};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: String,
}

/// A fully loaded manifest. Counts are always derived from `records`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub schema_version: String,
    pub records: Vec<SampleRecord>,
    pub counts: BTreeMap<Task, usize>,
}

impl Manifest {
    pub fn new(records: Vec<SampleRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(ModelError::DuplicateId(r.id.clone()));
            }
        }
        let mut counts = BTreeMap::new();
        for r in &records {
            *counts.entry(r.task).or_insert(0) += 1;
        }
        Ok(Self {
            schema_version: SCHEMA_VERSION.to_string(),
            records,
            counts,
        })
    }

    pub fn count(&self, task: Task) -> usize {
        self.counts.get(&task).copied().unwrap_or(0)
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn stats(&self) -> DatasetStats {
        let mut sources = HashSet::new();
        let mut labels = HashSet::new();
        for r in &self.records {
            sources.insert(r.source_id().unwrap_or(&r.id));
            if let Some(l) = &r.entity_label {
                labels.insert(l.as_str());
            }
        }
        DatasetStats {
            addition_modification: self.count(Task::AdditionModification),
            deletion: self.count(Task::Deletion),
            sources: sources.len(),
            entity_labels: labels.len(),
        }
    }
}

/// Record counts per task, distinct sources and distinct entity labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub addition_modification: usize,
    pub deletion: usize,
    pub sources: usize,
    pub entity_labels: usize,
}

/// Append-only manifest writer. Holding `&mut self` serializes appends.
pub struct ManifestWriter {
    path: PathBuf,
    out: BufWriter<File>,
    ids: HashSet<String>,
}

impl ManifestWriter {
    /// Creates (or truncates) a manifest and writes its header line.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(&path)?);
        serde_json::to_writer(
            &mut out,
            &Header {
                schema_version: SCHEMA_VERSION.into(),
            },
        )
        .map_err(|e| ModelError::SchemaViolation(e.to_string()))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(Self {
            path,
            out,
            ids: HashSet::new(),
        })
    }

    /// Opens an existing manifest for appending, or creates it.
    pub fn open_append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Self::create(path);
        }
        let existing = read_manifest(path)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            ids: existing.records.into_iter().map(|r| r.id).collect(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &SampleRecord) -> Result<()> {
        record.validate()?;
        if !self.ids.insert(record.id.clone()) {
            return Err(ModelError::DuplicateId(record.id.clone()));
        }
        serde_json::to_writer(&mut self.out, record)
            .map_err(|e| ModelError::SchemaViolation(e.to_string()))?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[SampleRecord]) -> Result<PathBuf> {
    let mut w = ManifestWriter::create(path)?;
    for r in records {
        w.append(r)?;
    }
    w.finish()
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<(String, Vec<T>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let header: Header = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?)
            .map_err(|e| ModelError::SchemaViolation(format!("manifest header: {e}")))?,
        None => return Err(ModelError::SchemaViolation("missing header line".into())),
    };
    if header.schema_version != SCHEMA_VERSION {
        return Err(ModelError::SchemaViolation(format!(
            "unsupported schema_version {:?}",
            header.schema_version
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| ModelError::SchemaViolation(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok((header.schema_version, out))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let (_, records) = read_lines::<SampleRecord>(path.as_ref())?;
    Manifest::new(records)
}

/// Reads a manifest whose records may carry `edited_ref`.
pub fn read_eval_records(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>> {
    let (_, records) = read_lines::<EvalRecord>(path.as_ref())?;
    let mut seen = HashSet::new();
    for r in &records {
        r.sample.validate()?;
        if !seen.insert(r.sample.id.clone()) {
            return Err(ModelError::DuplicateId(r.sample.id.clone()));
        }
    }
    Ok(records)
}
