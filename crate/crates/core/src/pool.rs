//! Generate-and-filter: sample hypotheses from view-specialist prompts, then
//! discard every hypothesis that fails to reproduce any training pair.
//!
//! Hypotheses carrying a parsed DSL program are checked by the interpreter.
//! Hypotheses with only prose are checked by asking the model to apply the
//! prose to each training input; that route is non-deterministic and ranks
//! below interpreter-checked survivors.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_instruction, verify_instruction, Instruction, PairOutcome, VerificationReport};
use crate::llm::prompts::{self, ActionSections, Seed};
use crate::llm::{llm_apply, split_sections, ChatMessage, CompletionParams, LlmBackend};
use crate::task::{grids_equal, Task, TaskPair};
use crate::views::SegmentationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Object,
    Overall,
    Segment,
    Generic,
}

impl View {
    pub const SPECIALISTS: [View; 3] = [View::Object, View::Overall, View::Segment];

    fn sections(self) -> ActionSections {
        match self {
            View::Object => ActionSections::Object,
            View::Overall => ActionSections::Overall,
            View::Segment => ActionSections::Segment,
            View::Generic => ActionSections::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub view: View,
    pub broad_description: String,
    pub detailed_steps: String,
    pub instruction: Option<Instruction>,
    pub sample_index: usize,
    /// Why a ```dsl block was present but did not parse.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsl_error: Option<String>,
}

impl Candidate {
    /// Build from one completion, parsing any ```dsl block.
    pub fn from_completion(view: View, sample_index: usize, completion: &str) -> Self {
        let sections = split_sections(completion);
        let (instruction, dsl_error) = match extract_dsl_block(completion) {
            None => (None, None),
            Some(block) => match parse_instruction(block) {
                Ok(instr) => (Some(instr), None),
                Err(e) => (None, Some(e.to_string())),
            },
        };
        Self {
            view,
            broad_description: sections.broad,
            detailed_steps: sections.detailed,
            instruction,
            sample_index,
            dsl_error,
        }
    }
}

/// Body of the first fenced block tagged `dsl`.
pub fn extract_dsl_block(text: &str) -> Option<&str> {
    let start = text.find("```dsl")?;
    let body_start = start + text[start..].find('\n')? + 1;
    let body_len = text[body_start..].find("```")?;
    Some(&text[body_start..body_start + body_len])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewFailure {
    pub view: View,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub candidates: Vec<Candidate>,
    /// Views whose request failed; their candidates are missing.
    pub failures: Vec<ViewFailure>,
}

impl CandidatePool {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// One request per view, `params.sample_count` samples each. Candidates come
/// out ordered by (view, sample_index).
pub fn generate_candidates(
    task: &Task,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
    views: &BTreeSet<View>,
    seed: &Seed,
) -> CandidatePool {
    assert!(!views.is_empty(), "generate_candidates needs at least one view");
    let mut pool = CandidatePool::default();
    for &view in views {
        let messages = [ChatMessage::user(prompts::view_prompt(task, view.sections(), seed))];
        match backend.complete(&messages, params) {
            Ok(completions) if completions.len() == params.sample_count => {
                pool.candidates.extend(
                    completions
                        .iter()
                        .enumerate()
                        .map(|(i, c)| Candidate::from_completion(view, i, c)),
                );
            }
            Ok(completions) => pool.failures.push(ViewFailure {
                view,
                error: format!(
                    "expected {} completion(s), got {}",
                    params.sample_count,
                    completions.len()
                ),
            }),
            Err(e) => {
                log::warn!("{view:?} view request failed: {e}");
                pool.failures.push(ViewFailure {
                    view,
                    error: e.to_string(),
                });
            }
        }
    }
    pool
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    DslExecuted,
    LlmApplied,
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub candidate: Candidate,
    pub report: VerificationReport,
    pub mode: FilterMode,
}

impl FilterOutcome {
    pub fn survived(&self) -> bool {
        self.mode != FilterMode::Unverifiable && self.report.passed()
    }
}

fn llm_check(
    candidate: &Candidate,
    pairs: &[TaskPair],
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> (VerificationReport, FilterMode) {
    let text = if candidate.detailed_steps.trim().is_empty() {
        candidate.broad_description.trim()
    } else {
        candidate.detailed_steps.trim()
    };
    let mut outcomes = Vec::new();
    let mut mode = FilterMode::LlmApplied;
    if text.is_empty() {
        outcomes.push(PairOutcome::Error {
            reason: "candidate has no instruction text".into(),
        });
        mode = FilterMode::Unverifiable;
    } else {
        for pair in pairs {
            let outcome = match (&pair.output, llm_apply(text, &pair.input, backend, params)) {
                (None, _) => PairOutcome::Error {
                    reason: "pair has no expected output".into(),
                },
                (Some(_), Err(e)) => PairOutcome::Error { reason: e.to_string() },
                (Some(_), Ok((None, _))) => {
                    mode = FilterMode::Unverifiable;
                    PairOutcome::Error {
                        reason: "no grid in reply".into(),
                    }
                }
                (Some(expected), Ok((Some(got), _))) if grids_equal(expected, &got) => PairOutcome::Pass,
                (Some(expected), Ok((Some(got), _))) => PairOutcome::Fail {
                    expected: expected.clone(),
                    got,
                },
            };
            let failed = !outcome.is_pass();
            outcomes.push(outcome);
            if failed {
                break;
            }
        }
    }
    (
        VerificationReport {
            outcomes,
            pair_count: pairs.len(),
        },
        mode,
    )
}

/// Check every candidate against the training pairs. Each outcome depends
/// only on its own candidate.
pub fn filter_candidates(
    pool: &[Candidate],
    train_pairs: &[TaskPair],
    backend: &dyn LlmBackend,
    params: &CompletionParams,
    config: &SegmentationConfig,
) -> Vec<FilterOutcome> {
    pool.iter()
        .map(|candidate| {
            let (report, mode) = match &candidate.instruction {
                Some(instr) => (verify_instruction(instr, train_pairs, config), FilterMode::DslExecuted),
                None => llm_check(candidate, train_pairs, backend, params),
            };
            FilterOutcome {
                candidate: candidate.clone(),
                report,
                mode,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no candidate reproduced every training pair")]
pub struct NoSurvivor;

fn simplicity_key(outcome: &FilterOutcome) -> (FilterMode, usize, usize, usize, View) {
    let c = &outcome.candidate;
    (
        outcome.mode,
        c.instruction.as_ref().map_or(usize::MAX, Instruction::len),
        c.detailed_steps.chars().count(),
        c.sample_index,
        c.view,
    )
}

/// Surviving outcomes, best first: interpreter-checked before model-checked,
/// then fewest primitives, shortest steps text, lowest sample index.
pub fn rank_survivors(outcomes: &[FilterOutcome]) -> Vec<&FilterOutcome> {
    let mut survivors: Vec<&FilterOutcome> = outcomes.iter().filter(|o| o.survived()).collect();
    survivors.sort_by_key(|o| simplicity_key(o));
    survivors
}

pub fn select_best(outcomes: &[FilterOutcome]) -> Result<&Candidate, NoSurvivor> {
    rank_survivors(outcomes).first().map(|o| &o.candidate).ok_or(NoSurvivor)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut file, item)?;
        file.write_all(b"\n")?;
    }
    file.flush()
}

/// Write `candidates.jsonl` and `outcomes.jsonl` into `dir`.
pub fn persist_run(dir: &Path, pool: &CandidatePool, outcomes: &[FilterOutcome]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_jsonl(&dir.join("candidates.jsonl"), &pool.candidates)?;
    write_jsonl(&dir.join("outcomes.jsonl"), outcomes)
}
