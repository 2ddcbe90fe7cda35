//! Batch experiments: one simulated interaction per record, dataset
//! proportions, and the context sweep.

mod factory;
mod judge;
pub mod planted;
mod report;
mod run;
mod session;
mod sweep;

use thiserror::Error;

use crate::agents::AgentError;
use crate::protocol::ProtocolError;

pub use factory::{resolve_policy, AgentSpec, FactoryOptions, SpecFactory, INITIATOR_NAME, RESPONDER_NAME};
pub use judge::{judge_correct, normalize, JudgeConfig, JudgeError, JudgeMode};
pub use report::{emit_report, emit_sweep, format_proportion, proportion_2dp, ReportFormat};
pub use run::{
    fingerprint, run_dataset, run_record, AgentFactory, CorrectAtK, ExperimentConfig, ExperimentReport, RunOutput,
};
pub use session::{run_interaction, Bucket, Session, SessionRun, SessionState, SessionStatus, Speaker};
pub use sweep::{augment_context, run_context_sweep, SweepRow, SweepTable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperimentError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("record {0}: {1}")]
    Agent(String, AgentError),
    #[error("k={k} exceeds the {recorded} recorded turn(s)")]
    TooFewTurns { k: usize, recorded: usize },
}
