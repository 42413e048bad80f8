//! Batch evaluation: run a solver flow over a directory of task files,
//! score by exact match and write transcripts plus a report.

mod report;
mod solve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{emit_report, render_diff, render_markdown, REPORT_JSON, REPORT_MD};
pub use solve::{solve_pair, PairSolve, PairTranscript, PoolTranscript, SolveContext, SolveError};

use crate::llm::{BackendError, ChatMessage, CompletionParams, LlmBackend};
use crate::memory::{record_solution, EmbeddingBackend, MemoryError, MemoryStore, RetrievalConfig};
use crate::pool::View;
use crate::task::{grids_equal, parse_task, Grid, Task, ARC_MAX_SIDE};
use crate::views::SegmentationConfig;

pub const TRANSCRIPT_DIR: &str = "transcripts";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunFlow {
    Naive,
    Hierarchical,
    Pooled,
    PooledMemory,
}

impl RunFlow {
    /// Completions per request: several per view for the pooled flows,
    /// one otherwise.
    pub fn default_sample_count(self) -> usize {
        match self {
            RunFlow::Pooled | RunFlow::PooledMemory => 3,
            RunFlow::Naive | RunFlow::Hierarchical => 1,
        }
    }
}

impl fmt::Display for RunFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunFlow::Naive => "naive",
            RunFlow::Hierarchical => "hierarchical",
            RunFlow::Pooled => "pooled",
            RunFlow::PooledMemory => "pooled-memory",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    /// Only these task ids, when set.
    pub task_filter: Option<Vec<String>>,
    pub flow: RunFlow,
    pub attempts: usize,
    pub params: CompletionParams,
    pub concurrency: usize,
    /// Persistent memory location; in-memory when absent.
    pub memory_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub views: BTreeSet<View>,
    pub retrieval: RetrievalConfig,
    pub segmentation: SegmentationConfig,
}

impl RunConfig {
    pub fn new(dataset_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>, flow: RunFlow, model: &str) -> Self {
        Self {
            dataset_dir: dataset_dir.into(),
            task_filter: None,
            flow,
            attempts: 1,
            params: CompletionParams::new(model, flow.default_sample_count()),
            concurrency: 1,
            memory_dir: None,
            out_dir: out_dir.into(),
            seed: 0,
            views: View::SPECIALISTS.into_iter().collect(),
            retrieval: RetrievalConfig::default(),
            segmentation: SegmentationConfig::default(),
        }
    }

    fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.attempts == 0 {
            return bad("attempts must be at least 1");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1");
        }
        if self.params.sample_count == 0 {
            return bad("sample count must be at least 1");
        }
        if self.views.is_empty() && matches!(self.flow, RunFlow::Pooled | RunFlow::PooledMemory) {
            return bad("pooled flows need at least one view");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset directory {0} not found")]
    DatasetNotFound(PathBuf),
    #[error("task {0} not found in the dataset")]
    UnknownTask(String),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// True iff one of the first `attempts` predictions equals `truth`.
pub fn score_prediction(predictions: &[Grid], truth: &Grid, attempts: usize) -> bool {
    predictions.iter().take(attempts).any(|p| grids_equal(p, truth))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPairResult {
    pub predictions: Vec<Grid>,
    pub truth: Option<Grid>,
    /// Index of the first matching prediction.
    pub matched: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub solved: bool,
    pub attempts_used: usize,
    /// First prediction for the first test pair.
    pub prediction: Option<Grid>,
    pub test_pairs: Vec<TestPairResult>,
    /// Relative to the output directory.
    pub transcript_path: Option<String>,
    pub requests: usize,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub dataset: String,
    pub task_filter: Option<Vec<String>>,
    pub flow: RunFlow,
    pub attempts: usize,
    pub model: String,
    pub temperature: String,
    pub sample_count: usize,
    pub concurrency: usize,
    pub seed: u64,
    pub persistent_memory: bool,
}

/// Everything that varies between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub task_wall_ms: BTreeMap<String, u128>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub total: usize,
    pub solved: usize,
    pub solve_rate: f64,
    pub requests: usize,
    pub results: Vec<TaskResult>,
    pub timing: Timing,
}

/// Counts requests for one task.
struct Counting<'a> {
    inner: &'a dyn LlmBackend,
    count: AtomicUsize,
}

impl LlmBackend for Counting<'_> {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<Vec<String>, BackendError> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(messages, params)
    }
}

enum Loaded {
    Ok(Task),
    Bad { id: String, error: String },
}

fn load_dataset(config: &RunConfig) -> Result<Vec<Loaded>, HarnessError> {
    let dir = &config.dataset_dir;
    if !dir.is_dir() {
        return Err(HarnessError::DatasetNotFound(dir.clone()));
    }
    let entries = fs::read_dir(dir).map_err(|source| HarnessError::Io {
        path: dir.clone(),
        source,
    })?;
    let mut files: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in entries {
        let path = entry
            .map_err(|source| HarnessError::Io {
                path: dir.clone(),
                source,
            })?
            .path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.insert(stem.to_string(), path);
            }
        }
    }
    if let Some(filter) = &config.task_filter {
        if let Some(missing) = filter.iter().find(|id| !files.contains_key(*id)) {
            return Err(HarnessError::UnknownTask(missing.clone()));
        }
        files.retain(|id, _| filter.contains(id));
    }
    Ok(files
        .into_iter()
        .map(|(id, path)| {
            let parsed = fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|text| parse_task(&text, &id).map_err(|e| e.to_string()));
            match parsed {
                Ok(task) => {
                    if task.largest_side() > ARC_MAX_SIDE {
                        log::warn!(
                            "task {id} has a grid side of {}, above {ARC_MAX_SIDE}",
                            task.largest_side()
                        );
                    }
                    Loaded::Ok(task)
                }
                Err(error) => {
                    log::warn!("skipping task {id}: {error}");
                    Loaded::Bad { id, error }
                }
            }
        })
        .collect())
}

#[derive(Serialize)]
struct TaskTranscript<'a> {
    task_id: &'a str,
    flow: RunFlow,
    test_pairs: &'a [PairTranscript],
}

struct Shared<'a> {
    config: &'a RunConfig,
    backend: &'a dyn LlmBackend,
    embedder: &'a dyn EmbeddingBackend,
}

fn failed(id: &str, error: String, requests: usize) -> TaskResult {
    TaskResult {
        task_id: id.to_string(),
        solved: false,
        attempts_used: 0,
        prediction: None,
        test_pairs: Vec::new(),
        transcript_path: None,
        requests,
        error: Some(error),
        wall_time_ms: 0,
    }
}

/// Solve and score one task; returns the descriptions to remember when solved.
fn run_task(task: &Task, shared: &Shared<'_>, memory: Option<&MemoryStore>) -> (TaskResult, Option<(String, String)>) {
    let config = shared.config;
    let counter = Counting {
        inner: shared.backend,
        count: AtomicUsize::new(0),
    };
    let ctx = SolveContext {
        backend: &counter,
        params: &config.params,
        attempts: config.attempts,
        views: &config.views,
        segmentation: &config.segmentation,
        embedder: shared.embedder,
        memory,
        retrieval: &config.retrieval,
    };
    let mut pair_results = Vec::new();
    let mut transcripts = Vec::new();
    let mut descriptions = None;
    for i in 0..task.test.len() {
        let single = task.with_single_test(i);
        match solve_pair(&single, config.flow, &ctx) {
            Ok(solved) => {
                let truth = task.test[i].output.clone();
                let matched = truth.as_ref().and_then(|t| {
                    solved
                        .predictions
                        .iter()
                        .take(config.attempts)
                        .position(|p| grids_equal(p, t))
                });
                pair_results.push(TestPairResult {
                    predictions: solved.predictions,
                    truth,
                    matched,
                });
                transcripts.push(solved.transcript);
                if descriptions.is_none() {
                    descriptions = solved.descriptions;
                }
            }
            Err(e) => {
                return (
                    failed(&task.id, format!("test pair {i}: {e}"), counter.count.into_inner()),
                    None,
                );
            }
        }
    }

    let rel = format!("{TRANSCRIPT_DIR}/{}.json", task.id);
    let path = config.out_dir.join(&rel);
    let body = TaskTranscript {
        task_id: &task.id,
        flow: config.flow,
        test_pairs: &transcripts,
    };
    let mut error = None;
    let transcript_path = match fs::write(
        &path,
        serde_json::to_string_pretty(&body).expect("transcript serializes"),
    ) {
        Ok(()) => Some(rel),
        Err(e) => {
            error = Some(format!("writing {}: {e}", path.display()));
            None
        }
    };

    let missing_truth = pair_results.iter().any(|p| p.truth.is_none());
    if missing_truth {
        error.get_or_insert_with(|| "no ground truth for a test pair".to_string());
    }
    let solved = !missing_truth && pair_results.iter().all(|p| p.matched.is_some());
    let attempts_used = pair_results
        .iter()
        .map(|p| p.matched.map_or(p.predictions.len().min(config.attempts), |m| m + 1))
        .max()
        .unwrap_or(0);
    let result = TaskResult {
        task_id: task.id.clone(),
        solved,
        attempts_used,
        prediction: pair_results.first().and_then(|p| p.predictions.first().cloned()),
        test_pairs: pair_results,
        transcript_path,
        requests: counter.count.into_inner(),
        error,
        wall_time_ms: 0,
    };
    (result, if solved { descriptions } else { None })
}

fn timed(f: impl FnOnce() -> TaskResult) -> TaskResult {
    let start = Instant::now();
    let mut r = f();
    r.wall_time_ms = start.elapsed().as_millis();
    r
}

/// Run the configured flow over the dataset and write transcripts and the
/// report under `config.out_dir`. Per-task failures are recorded, not raised.
pub fn run_eval(
    config: &RunConfig,
    backend: &dyn LlmBackend,
    embedder: &dyn EmbeddingBackend,
) -> Result<RunReport, HarnessError> {
    config.check()?;
    let started_at = Utc::now();
    let tasks = load_dataset(config)?;
    let transcript_dir = config.out_dir.join(TRANSCRIPT_DIR);
    fs::create_dir_all(&transcript_dir).map_err(|source| HarnessError::Io {
        path: transcript_dir.clone(),
        source,
    })?;
    let shared = Shared {
        config,
        backend,
        embedder,
    };

    let results: Vec<TaskResult> = if config.flow == RunFlow::PooledMemory {
        let mut store = match &config.memory_dir {
            Some(dir) => MemoryStore::open(dir, embedder.dimension())?,
            None => MemoryStore::in_memory(embedder.dimension()),
        };
        let mut results = Vec::with_capacity(tasks.len());
        for loaded in &tasks {
            let result = timed(|| match loaded {
                Loaded::Bad { id, error } => failed(id, error.clone(), 0),
                Loaded::Ok(task) => {
                    let (mut result, remember) = run_task(task, &shared, Some(&store));
                    if let Some((broad, detailed)) = remember {
                        if broad.trim().is_empty() || detailed.trim().is_empty() {
                            log::warn!("task {} solved with an empty description; not remembered", task.id);
                        } else if let Err(e) = record_solution(&task.id, &broad, &detailed, embedder, &mut store) {
                            log::warn!("could not remember task {}: {e}", task.id);
                            result.error.get_or_insert(format!("memory write-back: {e}"));
                        }
                    }
                    result
                }
            });
            results.push(result);
        }
        results
    } else {
        let slots: Vec<Mutex<Option<TaskResult>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = config.concurrency.min(tasks.len()).max(1);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(loaded) = tasks.get(i) else { break };
                    let result = timed(|| match loaded {
                        Loaded::Bad { id, error } => failed(id, error.clone(), 0),
                        Loaded::Ok(task) => run_task(task, &shared, None).0,
                    });
                    *slots[i].lock().expect("result slot") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("result slot").expect("every task ran"))
            .collect()
    };

    let solved = results.iter().filter(|r| r.solved).count();
    let total = results.len();
    let report = RunReport {
        config: ConfigEcho {
            dataset: config.dataset_dir.file_name().map_or_else(
                || config.dataset_dir.display().to_string(),
                |n| n.to_string_lossy().into_owned(),
            ),
            task_filter: config.task_filter.clone(),
            flow: config.flow,
            attempts: config.attempts,
            model: config.params.model_name.clone(),
            temperature: format!("{}", config.params.effective_temperature()),
            sample_count: config.params.sample_count,
            concurrency: config.concurrency,
            seed: config.seed,
            persistent_memory: config.memory_dir.is_some(),
        },
        total,
        solved,
        solve_rate: if total == 0 { 0.0 } else { solved as f64 / total as f64 },
        requests: results.iter().map(|r| r.requests).sum(),
        timing: Timing {
            started_at,
            finished_at: Utc::now(),
            task_wall_ms: results.iter().map(|r| (r.task_id.clone(), r.wall_time_ms)).collect(),
        },
        results,
    };
    emit_report(&report, &config.out_dir)?;
    log::info!("solved {}/{}", report.solved, report.total);
    Ok(report)
}

/// `report.json` with the timing field removed, for comparing runs.
pub fn report_without_timing(json: &str) -> serde_json::Result<String> {
    let mut value: serde_json::Value = serde_json::from_str(json)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("timing");
    }
    serde_json::to_string_pretty(&value)
}
