//! Re-running sessions with clarifications folded into the initial context.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::{fingerprint, in_pool, run_record, AgentFactory, ExperimentConfig, ExperimentReport, RunOutput};
use super::session::Session;
use super::ExperimentError;
use crate::datasets::DatasetRecord;
use crate::protocol::{Background, Interaction, MessageString};

/// The initial context for a re-run that already knows what the initiator
/// said in turns `2..=k`.
///
/// An answer to a counter-question is folded together with that question so
/// the statement stands on its own. `k = 1` returns `background` unchanged.
pub fn augment_context(
    transcript: &Interaction,
    background: &Background,
    k: usize,
) -> Result<Background, ExperimentError> {
    if k == 0 {
        return Err(ExperimentError::Config("k must be at least 1".into()));
    }
    let recorded = transcript.turn_count();
    if k > recorded {
        return Err(ExperimentError::TooFewTurns { k, recorded });
    }
    let mut out = background.clone();
    for turn in &transcript.turns()[1..k] {
        let opener = turn.first();
        match opener.payload() {
            MessageString::Answer { id, texts } => {
                let answer = texts.join(" ");
                let asked = transcript.messages().find_map(|m| match m.payload() {
                    MessageString::Question { id: q, text } if q == id && m.sender() != opener.sender() => {
                        Some(text.as_str())
                    }
                    _ => None,
                });
                out.insert(match asked {
                    Some(q) => format!("{q} {answer}"),
                    None => answer,
                });
            }
            MessageString::Statement { texts } => {
                for t in texts {
                    out.insert(t.clone());
                }
            }
            MessageString::Question { text, .. } => {
                out.insert(text.clone());
            }
            MessageString::Termination => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub report: ExperimentReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub dataset: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, k: usize) -> Option<&ExperimentReport> {
        self.rows.iter().find(|r| r.k == k).map(|r| &r.report)
    }
}

/// Re-runs every base session for k in `1..=k_max`.
///
/// Row 1 is the base report. For larger k each transcript contributes at
/// most as many turns as it recorded, and sessions that recorded one turn
/// are carried over unchanged.
pub fn run_context_sweep(
    records: &[DatasetRecord],
    base: &RunOutput,
    config: &ExperimentConfig,
    factory: &dyn AgentFactory,
    k_max: usize,
) -> Result<SweepTable, ExperimentError> {
    config.validate()?;
    if k_max == 0 {
        return Err(ExperimentError::Config("k_max must be at least 1".into()));
    }
    if records.len() != base.sessions.len() {
        return Err(ExperimentError::Config(format!(
            "{} records but {} base sessions",
            records.len(),
            base.sessions.len()
        )));
    }
    let mut rows = vec![SweepRow {
        k: 1,
        report: base.report.clone(),
    }];
    for k in 2..=k_max {
        let sessions: Vec<Session> = in_pool(config.workers, || {
            records
                .par_iter()
                .zip(base.sessions.par_iter())
                .map(|(record, prior)| rerun(record, prior, config, factory, k))
                .collect::<Result<Vec<_>, _>>()
        })??;
        let report = ExperimentReport::from_sessions(
            &config.dataset,
            &sessions,
            config.max_turns,
            config.exclude_errors,
            fingerprint(config, factory),
        );
        rows.push(SweepRow { k, report });
    }
    Ok(SweepTable {
        dataset: config.dataset.clone(),
        rows,
    })
}

fn rerun(
    record: &DatasetRecord,
    prior: &Session,
    config: &ExperimentConfig,
    factory: &dyn AgentFactory,
    k: usize,
) -> Result<Session, ExperimentError> {
    if prior.state.record_id != record.id {
        return Err(ExperimentError::Config(format!(
            "session for {} paired with record {}",
            prior.state.record_id, record.id
        )));
    }
    let usable = k.min(prior.interaction.turn_count());
    if usable <= 1 {
        return Ok(prior.clone());
    }
    let background = augment_context(&prior.interaction, &prior.background, usable)?;
    run_record(record, config, factory, &background)
}
