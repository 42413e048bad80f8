use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::extract::{extract_grid_from_completion, split_sections};
use super::prompts;
use super::{BackendError, ChatMessage, CompletionParams, LlmBackend};
use crate::task::{Grid, Task, TaskPair};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {source}")]
    Backend {
        stage: &'static str,
        #[source]
        source: BackendError,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl PipelineError {
    pub(crate) fn backend(stage: &'static str) -> impl FnOnce(BackendError) -> Self {
        move |source| PipelineError::Backend { stage, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flow {
    Naive,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptNote {
    /// The completion had no broad/step headers.
    NoSectionHeaders,
    /// The detailed-steps exchange returned nothing; the apply exchange was
    /// grounded on the broad description alone.
    EmptyDetailedSteps,
    EmptyBroadDescription,
    NoGridInCompletion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveTranscript {
    pub flow: Flow,
    pub broad_description: String,
    pub detailed_steps: String,
    pub predicted_output: Option<Grid>,
    pub raw_completions: Vec<String>,
    pub notes: Vec<TranscriptNote>,
}

/// Stand-in for an empty assistant turn so the conversation stays well-formed.
const EMPTY_REPLY: &str = "(no response)";

fn request(
    backend: &dyn LlmBackend,
    messages: &[ChatMessage],
    params: &CompletionParams,
    stage: &'static str,
) -> Result<Vec<String>, PipelineError> {
    let completions = backend
        .complete(messages, params)
        .map_err(PipelineError::backend(stage))?;
    if completions.is_empty() {
        return Err(PipelineError::Backend {
            stage,
            source: BackendError::Protocol("backend returned no completions".into()),
        });
    }
    Ok(completions)
}

fn first_grid(completions: &[String]) -> Option<(usize, Grid)> {
    completions
        .iter()
        .enumerate()
        .find_map(|(i, c)| extract_grid_from_completion(c).map(|g| (i, g)))
}

/// One request with the full template; sections and answer parsed from the
/// first completion that contains a grid (or the first completion).
pub fn solve_naive(
    task: &Task,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<SolveTranscript, PipelineError> {
    let messages = prompts::build_naive_prompt(task);
    let completions = request(backend, &messages, params, "naive")?;
    let found = first_grid(&completions);
    let chosen = found.as_ref().map_or(0, |(i, _)| *i);
    let sections = split_sections(&completions[chosen]);

    let mut notes = Vec::new();
    if !sections.has_headers {
        notes.push(TranscriptNote::NoSectionHeaders);
    }
    if found.is_none() {
        notes.push(TranscriptNote::NoGridInCompletion);
    }
    Ok(SolveTranscript {
        flow: Flow::Naive,
        broad_description: sections.broad,
        detailed_steps: sections.detailed,
        predicted_output: found.map(|(_, g)| g),
        raw_completions: completions,
        notes,
    })
}

/// Broad description, then detailed steps grounded on it, then the answer,
/// as three turns of one conversation.
pub fn solve_hierarchical(
    task: &Task,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<SolveTranscript, PipelineError> {
    let single = params.single();
    let mut notes = Vec::new();

    let mut conversation = vec![ChatMessage::user(prompts::hierarchical_broad_prompt(task))];
    let broad_reply = request(backend, &conversation, &single, "hierarchical broad")?.remove(0);
    let sections = split_sections(&broad_reply);
    let broad = if sections.broad.is_empty() {
        broad_reply.trim().to_string()
    } else {
        sections.broad
    };
    if broad.is_empty() {
        notes.push(TranscriptNote::EmptyBroadDescription);
    }
    conversation.push(ChatMessage::assistant(non_empty(&broad_reply)));
    let after_broad = conversation.clone();

    conversation.push(ChatMessage::user(prompts::hierarchical_steps_prompt()));
    let steps_reply = request(backend, &conversation, &single, "hierarchical steps")?.remove(0);
    let sections = split_sections(&steps_reply);
    let detailed = if sections.detailed.is_empty() {
        steps_reply.trim().to_string()
    } else {
        sections.detailed
    };

    let apply_conversation = if detailed.is_empty() {
        notes.push(TranscriptNote::EmptyDetailedSteps);
        let mut c = after_broad;
        c.push(ChatMessage::user(prompts::hierarchical_apply_prompt(false)));
        c
    } else {
        conversation.push(ChatMessage::assistant(steps_reply.clone()));
        conversation.push(ChatMessage::user(prompts::hierarchical_apply_prompt(true)));
        conversation
    };
    let answers = request(backend, &apply_conversation, params, "hierarchical apply")?;
    let predicted = first_grid(&answers).map(|(_, g)| g);
    if predicted.is_none() {
        notes.push(TranscriptNote::NoGridInCompletion);
    }

    let mut raw = vec![broad_reply, steps_reply];
    raw.extend(answers);
    Ok(SolveTranscript {
        flow: Flow::Hierarchical,
        broad_description: broad,
        detailed_steps: detailed,
        predicted_output: predicted,
        raw_completions: raw,
        notes,
    })
}

fn non_empty(text: &str) -> String {
    if text.trim().is_empty() {
        EMPTY_REPLY.to_string()
    } else {
        text.to_string()
    }
}

/// Describe a single solved pair in its own request.
pub fn describe_pair(
    pair: &TaskPair,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<String, PipelineError> {
    if pair.output.is_none() {
        return Err(PipelineError::Precondition(
            "describe_pair needs a pair with an output".into(),
        ));
    }
    let messages = [ChatMessage::user(prompts::describe_pair_prompt(pair))];
    Ok(request(backend, &messages, &params.single(), "describe pair")?.remove(0))
}

/// Merge per-pair descriptions into one.
pub fn collate_descriptions(
    descriptions: &[String],
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<String, PipelineError> {
    if descriptions.is_empty() {
        return Err(PipelineError::Precondition(
            "collate_descriptions needs at least one description".into(),
        ));
    }
    let messages = [ChatMessage::user(prompts::collate_prompt(descriptions))];
    Ok(request(backend, &messages, &params.single(), "collate")?.remove(0))
}

/// Ask the model to execute a textual instruction on one grid. Returns the
/// parsed grid, if any, and the raw reply.
pub fn llm_apply(
    instruction: &str,
    input: &Grid,
    backend: &dyn LlmBackend,
    params: &CompletionParams,
) -> Result<(Option<Grid>, String), PipelineError> {
    let messages = [ChatMessage::user(prompts::apply_prompt(instruction, input))];
    let reply = request(backend, &messages, &params.single(), "llm apply")?.remove(0);
    Ok((extract_grid_from_completion(&reply), reply))
}
