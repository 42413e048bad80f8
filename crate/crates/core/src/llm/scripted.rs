//! Offline replay of recorded conversations.
//!
//! A transcript directory holds one JSON file per request:
//!
//! ```json
//! {"messages": [{"role": "user", "content": "..."}], "completions": ["..."]}
//! ```
//!
//! Files are matched by the SHA-256 digest of their `messages` (see
//! [`message_digest`]), not by file name; by convention the file is named
//! `<digest>.json`. Subdirectories are searched too.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{message_digest, BackendError, ChatMessage, CompletionParams, LlmBackend};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptFile {
    pub messages: Vec<ChatMessage>,
    pub completions: Vec<String>,
}

/// Replays recorded completions; unknown requests are errors.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    transcripts: HashMap<String, Vec<String>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, messages: Vec<ChatMessage>, completions: Vec<String>) {
        self.transcripts.insert(message_digest(&messages), completions);
    }

    pub fn len(&self) -> usize {
        self.transcripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transcripts.is_empty()
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, BackendError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(BackendError::Config(format!(
                "transcript directory {} not found",
                dir.display()
            )));
        }
        let mut files = Vec::new();
        collect_json(dir, &mut files)?;
        files.sort();
        let mut backend = Self::new();
        for path in files {
            let text =
                fs::read_to_string(&path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
            let file: TranscriptFile =
                serde_json::from_str(&text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
            let digest = message_digest(&file.messages);
            if let Some(existing) = backend.transcripts.get(&digest) {
                if *existing != file.completions {
                    return Err(BackendError::Config(format!(
                        "{}: conflicting completions for digest {digest}",
                        path.display()
                    )));
                }
            }
            backend.transcripts.insert(digest, file.completions);
        }
        Ok(backend)
    }
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), BackendError> {
    let entries = fs::read_dir(dir).map_err(|e| BackendError::Config(format!("{}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| BackendError::Config(e.to_string()))?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<Vec<String>, BackendError> {
        let digest = message_digest(messages);
        let recorded = self
            .transcripts
            .get(&digest)
            .ok_or(BackendError::UnknownTranscript { digest: digest.clone() })?;
        if recorded.len() < params.sample_count {
            return Err(BackendError::Protocol(format!(
                "transcript {digest} records {} completion(s), request asked for {}",
                recorded.len(),
                params.sample_count
            )));
        }
        Ok(recorded[..params.sample_count].to_vec())
    }
}

/// Passes requests through and writes each exchange as a transcript file,
/// producing a directory [`ScriptedBackend::load_dir`] can replay.
pub struct RecordingBackend<B> {
    inner: B,
    dir: PathBuf,
}

impl<B: LlmBackend> RecordingBackend<B> {
    pub fn new(inner: B, dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { inner, dir })
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<Vec<String>, BackendError> {
        let completions = self.inner.complete(messages, params)?;
        let file = TranscriptFile {
            messages: messages.to_vec(),
            completions: completions.clone(),
        };
        let path = self.dir.join(format!("{}.json", message_digest(messages)));
        let text = serde_json::to_string_pretty(&file).expect("transcript serializes");
        fs::write(&path, text).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Ok(completions)
    }
}
