//! Persistent instruction memories with exact cosine top-k retrieval.
//!
//! Two kinds of entries are kept: broad descriptions and detailed step lists
//! of solved tasks. Each kind lives in its own append-only JSON-lines file.

mod embed;
mod refine;

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{
    cosine, l2_normalize, tokenize, EmbedError, EmbeddingBackend, HashedEmbedder, RemoteEmbedder, RemoteEmbedderConfig,
    HASHED_DIM,
};
pub use refine::{
    describe_prompt, record_solution, refine_with_memory, RefineError, RefineStep, RefineTrace, Refined,
    RetrievalConfig,
};

pub const BROAD_FILE: &str = "broad_instruct.jsonl";
pub const DETAILED_FILE: &str = "detailed_instruct.jsonl";

const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryKind {
    Broad,
    Detailed,
}

impl MemoryKind {
    pub fn file_name(self) -> &'static str {
        match self {
            MemoryKind::Broad => BROAD_FILE,
            MemoryKind::Detailed => DETAILED_FILE,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            MemoryKind::Broad => "broad",
            MemoryKind::Detailed => "detailed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub id: String,
    pub kind: MemoryKind,
    pub text: String,
    pub embedding: Vec<f64>,
    pub source_task: String,
    pub created_at: DateTime<Utc>,
}

impl MemoryEntry {
    /// Id of the entry written for a solved task.
    pub fn solution_id(task_id: &str, kind: MemoryKind) -> String {
        format!("{task_id}:{}", kind.suffix())
    }

    fn validate(&self) -> Result<(), MemoryError> {
        if self.text.trim().is_empty() {
            return Err(MemoryError::InvalidEntry(format!("{}: empty text", self.id)));
        }
        let norm = self.embedding.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() >= NORM_TOLERANCE {
            return Err(MemoryError::InvalidEntry(format!("{}: embedding norm {norm}", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("memory id {0} already exists")]
    DuplicateId(String),
    #[error("embedding has dimension {found}, store expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid memory entry {0}")]
    InvalidEntry(String),
    #[error("{path}:{line}: {detail}")]
    Corrupt { path: PathBuf, line: usize, detail: String },
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Both memories. Writers need `&mut`; any number of readers can query a
/// shared reference.
#[derive(Debug)]
pub struct MemoryStore {
    dimension: usize,
    dir: Option<PathBuf>,
    broad: Vec<MemoryEntry>,
    detailed: Vec<MemoryEntry>,
    ids: HashSet<String>,
}

impl MemoryStore {
    pub fn in_memory(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self {
            dimension,
            dir: None,
            broad: Vec::new(),
            detailed: Vec::new(),
            ids: HashSet::new(),
        }
    }

    /// Load (or create) the store files under `dir`.
    pub fn open(dir: impl AsRef<Path>, dimension: usize) -> Result<Self, MemoryError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut store = Self::in_memory(dimension);
        for kind in [MemoryKind::Broad, MemoryKind::Detailed] {
            let path = dir.join(kind.file_name());
            if !path.exists() {
                continue;
            }
            let reader = BufReader::new(File::open(&path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |detail: String| MemoryError::Corrupt {
                    path: path.clone(),
                    line: n + 1,
                    detail,
                };
                let entry: MemoryEntry = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if entry.kind != kind {
                    return Err(corrupt(format!("{:?} entry in the {:?} file", entry.kind, kind)));
                }
                store.admit(entry).map_err(|e| corrupt(e.to_string()))?;
            }
        }
        store.dir = Some(dir.to_path_buf());
        Ok(store)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.broad.len() + self.detailed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self, kind: MemoryKind) -> &[MemoryEntry] {
        match kind {
            MemoryKind::Broad => &self.broad,
            MemoryKind::Detailed => &self.detailed,
        }
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    fn check_dimension(&self, found: usize) -> Result<(), MemoryError> {
        if found != self.dimension {
            return Err(MemoryError::DimensionMismatch {
                expected: self.dimension,
                found,
            });
        }
        Ok(())
    }

    fn admit(&mut self, entry: MemoryEntry) -> Result<(), MemoryError> {
        self.check_dimension(entry.embedding.len())?;
        entry.validate()?;
        if self.ids.contains(&entry.id) {
            return Err(MemoryError::DuplicateId(entry.id));
        }
        self.ids.insert(entry.id.clone());
        match entry.kind {
            MemoryKind::Broad => self.broad.push(entry),
            MemoryKind::Detailed => self.detailed.push(entry),
        }
        Ok(())
    }

    /// Validate, append to the kind's file (if persistent), then index.
    pub fn insert(&mut self, entry: MemoryEntry) -> Result<(), MemoryError> {
        self.check_dimension(entry.embedding.len())?;
        entry.validate()?;
        if self.ids.contains(&entry.id) {
            return Err(MemoryError::DuplicateId(entry.id));
        }
        if let Some(dir) = &self.dir {
            let mut line = serde_json::to_string(&entry).map_err(io::Error::from)?;
            line.push('\n');
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(dir.join(entry.kind.file_name()))?;
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.admit(entry)
    }

    /// Up to `k` entries of `kind`, by descending cosine similarity to
    /// `query`, ties by ascending id. Exhaustive scan.
    pub fn top_k(&self, query: &[f64], kind: MemoryKind, k: usize) -> Result<Vec<(&MemoryEntry, f64)>, MemoryError> {
        self.check_dimension(query.len())?;
        let mut scored: Vec<(&MemoryEntry, f64)> = self
            .entries(kind)
            .iter()
            .map(|e| (e, cosine(query, &e.embedding)))
            .collect();
        scored.sort_by(|(ea, sa), (eb, sb)| sb.total_cmp(sa).then_with(|| ea.id.cmp(&eb.id)));
        scored.truncate(k);
        Ok(scored)
    }
}
