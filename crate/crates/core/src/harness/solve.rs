//! One test input through one solver flow, producing ordered distinct
//! predictions plus everything needed to audit them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::RunFlow;
use crate::dsl::apply_instruction;
use crate::llm::prompts::Seed;
use crate::llm::{
    extract_grid_from_completion, llm_apply, solve_hierarchical, solve_naive, CompletionParams, LlmBackend,
    PipelineError, SolveTranscript,
};
use crate::memory::{
    refine_with_memory, EmbeddingBackend, MemoryKind, MemoryStore, RefineError, RefineTrace, RetrievalConfig,
};
use crate::pool::{filter_candidates, generate_candidates, rank_survivors, CandidatePool, FilterOutcome, View};
use crate::task::{Grid, Task};
use crate::views::SegmentationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolTranscript {
    pub pool: CandidatePool,
    pub outcomes: Vec<FilterOutcome>,
    /// Raw replies of model-applied survivors on the test input.
    pub test_applications: Vec<String>,
    /// Set when no survivor produced a prediction and the naive flow ran.
    pub fallback: Option<SolveTranscript>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flow", rename_all = "kebab-case")]
pub enum PairTranscript {
    Naive(SolveTranscript),
    Hierarchical(SolveTranscript),
    Pooled(PoolTranscript),
    PooledMemory {
        broad: RefineTrace,
        detailed: RefineTrace,
        pool: PoolTranscript,
    },
}

pub struct PairSolve {
    pub predictions: Vec<Grid>,
    pub transcript: PairTranscript,
    /// Broad and detailed descriptions worth remembering if the task is solved.
    pub descriptions: Option<(String, String)>,
}

pub struct SolveContext<'a> {
    pub backend: &'a dyn LlmBackend,
    pub params: &'a CompletionParams,
    pub attempts: usize,
    pub views: &'a BTreeSet<View>,
    pub segmentation: &'a SegmentationConfig,
    pub embedder: &'a dyn EmbeddingBackend,
    pub memory: Option<&'a MemoryStore>,
    pub retrieval: &'a RetrievalConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

fn push_distinct(preds: &mut Vec<Grid>, grid: Grid, limit: usize) {
    if preds.len() < limit && !preds.contains(&grid) {
        preds.push(grid);
    }
}

fn grids_in(completions: &[String], preds: &mut Vec<Grid>, limit: usize) {
    for c in completions {
        if let Some(g) = extract_grid_from_completion(c) {
            push_distinct(preds, g, limit);
        }
    }
}

fn run_pool(task: &Task, ctx: &SolveContext<'_>, seed: &Seed) -> Result<(Vec<Grid>, PoolTranscript), SolveError> {
    let pool = generate_candidates(task, ctx.backend, ctx.params, ctx.views, seed);
    let outcomes = filter_candidates(&pool.candidates, &task.train, ctx.backend, ctx.params, ctx.segmentation);
    let test_input = &task.test[0].input;
    let mut preds = Vec::new();
    let mut test_applications = Vec::new();
    for survivor in rank_survivors(&outcomes) {
        if preds.len() >= ctx.attempts {
            break;
        }
        let c = &survivor.candidate;
        match &c.instruction {
            Some(instr) => match apply_instruction(instr, test_input, ctx.segmentation) {
                Ok(g) => push_distinct(&mut preds, g, ctx.attempts),
                Err(e) => log::info!("survivor {:?}/{} fails on the test input: {e}", c.view, c.sample_index),
            },
            None => {
                let text = if c.detailed_steps.trim().is_empty() {
                    &c.broad_description
                } else {
                    &c.detailed_steps
                };
                let (grid, reply) = llm_apply(text, test_input, ctx.backend, ctx.params)?;
                test_applications.push(reply);
                if let Some(g) = grid {
                    push_distinct(&mut preds, g, ctx.attempts);
                }
            }
        }
    }
    let fallback = if preds.is_empty() {
        let naive = solve_naive(task, ctx.backend, ctx.params)?;
        grids_in(&naive.raw_completions, &mut preds, ctx.attempts);
        Some(naive)
    } else {
        None
    };
    Ok((
        preds,
        PoolTranscript {
            pool,
            outcomes,
            test_applications,
            fallback,
        },
    ))
}

/// `task` must carry exactly one test pair.
pub fn solve_pair(task: &Task, flow: RunFlow, ctx: &SolveContext<'_>) -> Result<PairSolve, SolveError> {
    debug_assert_eq!(task.test.len(), 1);
    let limit = ctx.attempts;
    let mut preds = Vec::new();
    match flow {
        RunFlow::Naive => {
            let t = solve_naive(task, ctx.backend, ctx.params)?;
            grids_in(&t.raw_completions, &mut preds, limit);
            let descriptions = Some((t.broad_description.clone(), t.detailed_steps.clone()));
            Ok(PairSolve {
                predictions: preds,
                transcript: PairTranscript::Naive(t),
                descriptions,
            })
        }
        RunFlow::Hierarchical => {
            let t = solve_hierarchical(task, ctx.backend, ctx.params)?;
            grids_in(&t.raw_completions[2..], &mut preds, limit);
            let descriptions = Some((t.broad_description.clone(), t.detailed_steps.clone()));
            Ok(PairSolve {
                predictions: preds,
                transcript: PairTranscript::Hierarchical(t),
                descriptions,
            })
        }
        RunFlow::Pooled => {
            let (preds, pool) = run_pool(task, ctx, &Seed::default())?;
            Ok(PairSolve {
                predictions: preds,
                transcript: PairTranscript::Pooled(pool),
                descriptions: None,
            })
        }
        RunFlow::PooledMemory => {
            let store = ctx.memory.expect("pooled-memory flow needs a memory store");
            let broad = refine_with_memory(
                task,
                ctx.backend,
                ctx.params,
                ctx.embedder,
                store,
                MemoryKind::Broad,
                ctx.retrieval,
                None,
            )?;
            let detailed = refine_with_memory(
                task,
                ctx.backend,
                ctx.params,
                ctx.embedder,
                store,
                MemoryKind::Detailed,
                ctx.retrieval,
                Some(&broad.text),
            )?;
            let seed = Seed {
                broad: Some(broad.text.clone()),
                detailed: Some(detailed.text.clone()),
            };
            let (preds, pool) = run_pool(task, ctx, &seed)?;
            Ok(PairSolve {
                predictions: preds,
                descriptions: Some((broad.text, detailed.text)),
                transcript: PairTranscript::PooledMemory {
                    broad: broad.trace,
                    detailed: detailed.trace,
                    pool,
                },
            })
        }
    }
}
