use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::judge::JudgeConfig;
use super::session::{run_interaction, Bucket, Session};
use super::ExperimentError;
use crate::agents::{Agent, AgentError};
use crate::datasets::DatasetRecord;
use crate::protocol::Background;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Dataset tag shown in reports.
    pub dataset: String,
    #[serde(default = "ExperimentConfig::default_max_turns")]
    pub max_turns: usize,
    #[serde(default)]
    pub judge: JudgeConfig,
    #[serde(default = "ExperimentConfig::default_workers")]
    pub workers: usize,
    /// Drop errored sessions from |d| instead of counting them unresolved.
    #[serde(default)]
    pub exclude_errors: bool,
    /// Seed each session's background with the record's passage.
    #[serde(default)]
    pub include_passage: bool,
}

impl ExperimentConfig {
    fn default_max_turns() -> usize {
        3
    }

    fn default_workers() -> usize {
        4
    }

    pub fn new(dataset: impl Into<String>) -> Self {
        Self {
            dataset: dataset.into(),
            max_turns: Self::default_max_turns(),
            judge: JudgeConfig::default(),
            workers: Self::default_workers(),
            exclude_errors: false,
            include_passage: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.max_turns == 0 {
            return Err(ExperimentError::Config("max_turns must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(ExperimentError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn base_background(&self, record: &DatasetRecord) -> Background {
        let mut bg = Background::new();
        if self.include_passage {
            if let Some(p) = &record.passage {
                bg.insert(p.clone());
            }
        }
        bg
    }
}

/// Builds fresh agents for each session.
pub trait AgentFactory: Sync {
    fn initiator(&self, record: &DatasetRecord) -> Result<Box<dyn Agent>, AgentError>;
    fn responder(&self, record: &DatasetRecord) -> Result<Box<dyn Agent>, AgentError>;
    /// Stable description folded into the report fingerprint.
    fn describe(&self) -> serde_json::Value;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectAtK {
    pub k: usize,
    pub count: usize,
    pub proportion: f64,
}

/// Dataset-level proportions. Counts are authoritative; proportions are
/// derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    /// |d|
    pub total: usize,
    /// |I_d|
    pub incomplete: usize,
    /// |A_d|
    pub ambiguous: usize,
    pub single_turn_correct: usize,
    pub unresolved: usize,
    pub errored: usize,
    pub excluded: usize,
    pub pi: f64,
    pub pa: f64,
    pub correct_at_1: f64,
    pub correct_at_k: Vec<CorrectAtK>,
    pub fingerprint: String,
}

fn ratio(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

impl ExperimentReport {
    /// Folds finished sessions into a report.
    pub fn from_sessions<'a>(
        dataset: &str,
        sessions: impl IntoIterator<Item = &'a Session>,
        max_turns: usize,
        exclude_errors: bool,
        fingerprint: String,
    ) -> Self {
        let mut r = ExperimentReport {
            dataset: dataset.to_string(),
            total: 0,
            incomplete: 0,
            ambiguous: 0,
            single_turn_correct: 0,
            unresolved: 0,
            errored: 0,
            excluded: 0,
            pi: 0.0,
            pa: 0.0,
            correct_at_1: 0.0,
            correct_at_k: Vec::new(),
            fingerprint,
        };
        let mut correct_by_turn = vec![0usize; max_turns + 1];
        for s in sessions {
            if s.state.error.is_some() {
                r.errored += 1;
                if exclude_errors {
                    r.excluded += 1;
                    continue;
                }
            }
            r.total += 1;
            match s.state.bucket() {
                Bucket::Incomplete => r.incomplete += 1,
                Bucket::Ambiguous => r.ambiguous += 1,
                Bucket::SingleTurnCorrect => r.single_turn_correct += 1,
                Bucket::Unresolved => r.unresolved += 1,
            }
            if let Some(t) = s.state.correct_at.filter(|_| s.state.error.is_none()) {
                if t < correct_by_turn.len() {
                    correct_by_turn[t] += 1;
                }
            }
        }
        r.pi = ratio(r.incomplete, r.total);
        r.pa = ratio(r.ambiguous, r.total);
        r.correct_at_1 = ratio(r.single_turn_correct, r.total);
        let mut cumulative = 0;
        for (k, n) in correct_by_turn.iter().enumerate().skip(1) {
            cumulative += n;
            r.correct_at_k.push(CorrectAtK {
                k,
                count: cumulative,
                proportion: ratio(cumulative, r.total),
            });
        }
        r
    }

    /// PI + PA.
    pub fn flagged(&self) -> usize {
        self.incomplete + self.ambiguous
    }
}

/// Result of a batch run: the report plus every session, in record order.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub sessions: Vec<Session>,
}

pub fn fingerprint(config: &ExperimentConfig, factory: &dyn AgentFactory) -> String {
    let doc = serde_json::json!({ "config": config, "agents": factory.describe() });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    hex::encode(&digest[..8])
}

/// Runs one record with agents from `factory` and the given background.
pub fn run_record(
    record: &DatasetRecord,
    config: &ExperimentConfig,
    factory: &dyn AgentFactory,
    background: &Background,
) -> Result<Session, ExperimentError> {
    let mut initiator = factory.initiator(record).map_err(|e| ExperimentError::Agent(record.id.clone(), e))?;
    let mut responder = factory.responder(record).map_err(|e| ExperimentError::Agent(record.id.clone(), e))?;
    run_interaction(record, &mut *initiator, &mut *responder, &config.judge, config.max_turns, background)
}

pub(crate) fn in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(pool.install(job))
}

/// Simulates one session per record, up to `config.workers` at a time.
pub fn run_dataset(
    records: &[DatasetRecord],
    config: &ExperimentConfig,
    factory: &dyn AgentFactory,
) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    if records.is_empty() {
        return Err(ExperimentError::EmptyDataset);
    }
    let sessions = in_pool(config.workers, || {
        records
            .par_iter()
            .map(|r| run_record(r, config, factory, &config.base_background(r)))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let report = ExperimentReport::from_sessions(
        &config.dataset,
        &sessions,
        config.max_turns,
        config.exclude_errors,
        fingerprint(config, factory),
    );
    tracing::info!(
        dataset = %config.dataset,
        total = report.total,
        incomplete = report.incomplete,
        ambiguous = report.ambiguous,
        "run finished"
    );
    Ok(RunOutput { report, sessions })
}
