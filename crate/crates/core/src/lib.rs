//! Prompt-engineered LLM pipeline for ARC tasks.
//!
//! Deterministic stages (task parsing, grid analysis, the instruction DSL,
//! candidate filtering, memory retrieval and scoring) run offline; every
//! model call goes through the [`llm::LlmBackend`] trait so the whole
//! pipeline can be replayed from recorded transcripts.

pub mod dsl;
pub mod harness;
pub mod llm;
pub mod memory;
pub mod pool;
pub mod task;
pub mod views;

pub use task::{grids_equal, parse_task, redact_test_output, Grid, Task, TaskPair};
