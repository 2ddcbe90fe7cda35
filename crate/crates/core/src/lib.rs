//! Formal interaction model for question answering between two agents.
//!
//! The crate is organised bottom-up:
//!
//! - [`protocol`]: typed messages, turns, interactions, per-agent contexts,
//!   question/answer sequence extraction and the line-delimited transcript
//!   format.
//! - [`classifier`]: syntactic detectors for possibly-incomplete and
//!   possibly-ambiguous initial questions, oracle verdicts, and a rule-based
//!   utterance categorizer.
//! - [`agents`]: the [`agents::Agent`] trait with oracle, scripted, LLM and
//!   human-bridge implementations.
//! - [`datasets`]: QA record loading with adapters for common benchmark
//!   layouts.
//! - [`experiment`]: session simulation, correctness judging, per-dataset
//!   proportions, the context-augmentation sweep and report rendering.
//! - [`rundir`]: on-disk layout of a run directory.

pub mod agents;
pub mod classifier;
pub mod datasets;
pub mod experiment;
pub mod protocol;
pub mod rundir;

pub use protocol::{
    AgentId, AgentKind, Background, Context, Interaction, Message, MessageKind, MessageString,
    ProtocolError, QaPair, QaSequence, QuestionId, Turn,
};
