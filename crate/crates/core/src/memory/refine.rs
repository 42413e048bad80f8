use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{cosine, EmbeddingBackend, MemoryEntry, MemoryError, MemoryKind, MemoryStore};
use crate::llm::prompts::{self, ActionSections};
use crate::llm::{split_sections, ChatMessage, CompletionParams, LlmBackend, PipelineError};
use crate::task::{redact_test_output, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k: usize,
    pub max_refine_iters: usize,
    /// Cosine between successive descriptions at which refinement stops.
    pub convergence_threshold: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 5,
            max_refine_iters: 3,
            convergence_threshold: 0.98,
        }
    }
}

impl RetrievalConfig {
    fn check(&self) -> Result<(), RefineError> {
        if self.k == 0 || self.max_refine_iters == 0 || !(0.0..=1.0).contains(&self.convergence_threshold) {
            return Err(RefineError::InvalidConfig(*self));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error(transparent)]
    Backend(#[from] PipelineError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("invalid retrieval config {0:?}")]
    InvalidConfig(RetrievalConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineStep {
    pub text: String,
    pub retrieved_ids: Vec<String>,
    /// Cosine to the previous step's text; absent on the first step.
    pub similarity_to_previous: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineTrace {
    pub kind: MemoryKind,
    pub steps: Vec<RefineStep>,
    pub converged: bool,
    /// Nothing of this kind was stored, so no retrieval happened.
    pub empty_store: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refined {
    pub text: String,
    pub trace: RefineTrace,
}

/// Ask for one kind of description, optionally grounded on a broad
/// description and on retrieved descriptions of earlier tasks.
pub fn describe_prompt(task: &Task, kind: MemoryKind, retrieved: &[&str], broad_context: Option<&str>) -> String {
    let mut out = prompts::priors(ActionSections::All);
    out.push_str("\n\n");
    if let Some(b) = broad_context.filter(|b| !b.trim().is_empty()) {
        out.push_str(&format!("Broad description of this task:\n{}\n\n", b.trim()));
    }
    if !retrieved.is_empty() {
        out.push_str("Descriptions from similar tasks solved before, for reference:\n");
        for (i, r) in retrieved.iter().enumerate() {
            out.push_str(&format!("Example {}:\n{}\n", i + 1, r.trim()));
        }
        out.push('\n');
    }
    let ask = match kind {
        MemoryKind::Broad => prompts::ASK_BROAD,
        MemoryKind::Detailed => prompts::ASK_STEPS,
    };
    out.push_str(&format!(
        "{}\n{ask}\n\n{}",
        prompts::DO_THE_FOLLOWING,
        redact_test_output(task)
    ));
    out
}

fn description_of(kind: MemoryKind, reply: &str) -> String {
    let sections = split_sections(reply);
    let picked = match kind {
        MemoryKind::Broad => sections.broad,
        MemoryKind::Detailed => sections.detailed,
    };
    if picked.is_empty() {
        reply.trim().to_string()
    } else {
        picked
    }
}

fn generate(
    task: &Task,
    kind: MemoryKind,
    retrieved: &[&str],
    broad_context: Option<&str>,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<String, PipelineError> {
    let messages = [ChatMessage::user(describe_prompt(task, kind, retrieved, broad_context))];
    let replies = backend
        .complete(&messages, &params.single())
        .map_err(PipelineError::backend("memory refine"))?;
    Ok(replies.first().map(|r| description_of(kind, r)).unwrap_or_default())
}

/// Generate a description, then repeatedly regenerate it with its top-k
/// stored neighbours as context until successive versions embed within
/// `convergence_threshold` of each other or `max_refine_iters` generations
/// have run.
#[allow(clippy::too_many_arguments)]
pub fn refine_with_memory(
    task: &Task,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
    embedder: &dyn EmbeddingBackend,
    store: &MemoryStore,
    kind: MemoryKind,
    config: &RetrievalConfig,
    broad_context: Option<&str>,
) -> Result<Refined, RefineError> {
    config.check()?;
    if embedder.dimension() != store.dimension() {
        return Err(MemoryError::DimensionMismatch {
            expected: store.dimension(),
            found: embedder.dimension(),
        }
        .into());
    }
    let first = generate(task, kind, &[], broad_context, backend, params)?;
    let mut trace = RefineTrace {
        kind,
        steps: vec![RefineStep {
            text: first.clone(),
            retrieved_ids: Vec::new(),
            similarity_to_previous: None,
        }],
        converged: false,
        empty_store: store.entries(kind).is_empty(),
    };
    if trace.empty_store || first.trim().is_empty() {
        return Ok(Refined { text: first, trace });
    }

    let mut text = first;
    let mut embedding = embedder.embed(&text).map_err(MemoryError::from)?;
    while trace.steps.len() < config.max_refine_iters {
        let hits = store.top_k(&embedding, kind, config.k)?;
        let retrieved: Vec<&str> = hits.iter().map(|(e, _)| e.text.as_str()).collect();
        let next = generate(task, kind, &retrieved, broad_context, backend, params)?;
        let retrieved_ids = hits.iter().map(|(e, _)| e.id.clone()).collect();
        if next.trim().is_empty() {
            trace.steps.push(RefineStep {
                text: next,
                retrieved_ids,
                similarity_to_previous: None,
            });
            break;
        }
        let next_embedding = embedder.embed(&next).map_err(MemoryError::from)?;
        let similarity = cosine(&embedding, &next_embedding);
        trace.steps.push(RefineStep {
            text: next.clone(),
            retrieved_ids,
            similarity_to_previous: Some(similarity),
        });
        text = next;
        embedding = next_embedding;
        if similarity >= config.convergence_threshold {
            trace.converged = true;
            break;
        }
    }
    Ok(Refined { text, trace })
}

/// Store the descriptions of a solved task, one entry per kind.
pub fn record_solution(
    task_id: &str,
    broad: &str,
    detailed: &str,
    embedder: &dyn EmbeddingBackend,
    store: &mut MemoryStore,
) -> Result<(), MemoryError> {
    let items = [(MemoryKind::Broad, broad), (MemoryKind::Detailed, detailed)];
    for (kind, _) in items {
        let id = MemoryEntry::solution_id(task_id, kind);
        if store.contains_id(&id) {
            return Err(MemoryError::DuplicateId(id));
        }
    }
    let mut entries = Vec::with_capacity(2);
    for (kind, text) in items {
        entries.push(MemoryEntry {
            id: MemoryEntry::solution_id(task_id, kind),
            kind,
            text: text.trim().to_string(),
            embedding: embedder.embed(text)?,
            source_task: task_id.to_string(),
            created_at: Utc::now(),
        });
    }
    for entry in entries {
        store.insert(entry)?;
    }
    Ok(())
}
