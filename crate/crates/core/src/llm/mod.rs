//! LLM boundary: chat types, the backend trait, prompt construction,
//! completion parsing and the naive / hierarchical solving flows.

mod extract;
mod http;
mod pipeline;
pub mod prompts;
mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use extract::{extract_grid_from_completion, split_sections, Sections};
pub use http::{HttpBackend, HttpConfig, DEFAULT_API_KEY_ENV};
pub use pipeline::{
    collate_descriptions, describe_pair, llm_apply, solve_hierarchical, solve_naive, Flow, PipelineError,
    SolveTranscript, TranscriptNote,
};
pub use prompts::build_naive_prompt;
pub use scripted::{RecordingBackend, ScriptedBackend, TranscriptFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    /// Panics on empty content; messages are always built from non-empty text.
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        let content = content.into();
        assert!(!content.is_empty(), "chat message content must be non-empty");
        Self { role, content }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub model_name: String,
    /// `None` means 0.0 for single samples and 1.0 when sampling several.
    pub temperature: Option<f64>,
    pub max_tokens: u32,
    pub sample_count: usize,
}

impl CompletionParams {
    pub fn new(model_name: impl Into<String>, sample_count: usize) -> Self {
        assert!(sample_count >= 1, "sample_count must be at least 1");
        Self {
            model_name: model_name.into(),
            temperature: None,
            max_tokens: 2048,
            sample_count,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        assert!(temperature >= 0.0, "temperature must be non-negative");
        self.temperature = Some(temperature);
        self
    }

    pub fn effective_temperature(&self) -> f64 {
        self.temperature
            .unwrap_or(if self.sample_count > 1 { 1.0 } else { 0.0 })
    }

    /// Same settings, one sample.
    pub fn single(&self) -> Self {
        Self {
            sample_count: 1,
            ..self.clone()
        }
    }

    pub fn with_samples(&self, sample_count: usize) -> Self {
        assert!(sample_count >= 1, "sample_count must be at least 1");
        Self {
            sample_count,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("no recorded transcript for request digest {digest}")]
    UnknownTranscript { digest: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

/// Anything that turns a conversation into `params.sample_count` completions.
///
/// Implementations must tolerate concurrent calls.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<Vec<String>, BackendError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<Vec<String>, BackendError> {
        (**self).complete(messages, params)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<Vec<String>, BackendError> {
        (**self).complete(messages, params)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<Vec<String>, BackendError> {
        (**self).complete(messages, params)
    }
}

/// Hex SHA-256 of the JSON encoding of a message sequence.
pub fn message_digest(messages: &[ChatMessage]) -> String {
    let encoded = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(&encoded))
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}
