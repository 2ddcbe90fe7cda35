//! One simulated interaction per record.

use serde::{Deserialize, Serialize};

use super::judge::{judge_correct, JudgeConfig};
use super::ExperimentError;
use crate::agents::{Agent, AgentError, ExchangeLog};
use crate::classifier::{classify_initial_question, QuestionStatus};
use crate::datasets::DatasetRecord;
use crate::protocol::{context_at, AgentId, Background, Interaction, Message, MessageString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    Open,
    AwaitingHuman,
    Done,
    Error,
}

impl SessionStatus {
    pub fn is_final(self) -> bool {
        matches!(self, SessionStatus::Done | SessionStatus::Error)
    }
}

/// Where a finished session lands in the dataset accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Incomplete,
    Ambiguous,
    SingleTurnCorrect,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub record_id: String,
    pub status: SessionStatus,
    pub max_turns: usize,
    pub turns_used: usize,
    /// `None` while the session is still running.
    pub classification: Option<QuestionStatus>,
    /// Turn of the first correct answer.
    pub correct_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SessionState {
    pub fn turns_remaining(&self) -> usize {
        self.max_turns.saturating_sub(self.turns_used)
    }

    /// Errored sessions count as unresolved.
    pub fn bucket(&self) -> Bucket {
        if self.status == SessionStatus::Error {
            return Bucket::Unresolved;
        }
        match self.classification {
            Some(QuestionStatus::PossiblyIncomplete(_)) => Bucket::Incomplete,
            Some(QuestionStatus::PossiblyAmbiguous(_)) => Bucket::Ambiguous,
            Some(QuestionStatus::AnsweredSingleTurn) if self.correct_at == Some(1) => Bucket::SingleTurnCorrect,
            _ => Bucket::Unresolved,
        }
    }
}

/// A finished (or failed) session.
#[derive(Debug, Clone)]
pub struct Session {
    pub state: SessionState,
    pub interaction: Interaction,
    pub background: Background,
    pub logs: Vec<ExchangeLog>,
    pub categorizer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Speaker {
    Initiator,
    Responder,
}

/// Step-wise session loop. Each [`advance`](SessionRun::advance) asks one
/// agent for one message.
#[derive(Debug, Clone)]
pub struct SessionRun {
    record: DatasetRecord,
    judge: JudgeConfig,
    background: Background,
    interaction: Interaction,
    state: SessionState,
    logs: Vec<ExchangeLog>,
    categorizer: String,
}

impl SessionRun {
    /// Opens the session with `(initiator, ?1(question), responder)`.
    pub fn start(
        record: &DatasetRecord,
        initiator: AgentId,
        responder: AgentId,
        judge: JudgeConfig,
        max_turns: usize,
        background: Background,
    ) -> Result<Self, ExperimentError> {
        if max_turns == 0 {
            return Err(ExperimentError::Config("max_turns must be at least 1".into()));
        }
        if record.question.trim().is_empty() {
            return Err(ExperimentError::Config(format!("record {} has no question", record.id)));
        }
        // the oracle gets exactly one turn
        let max_turns = if responder.is_oracle() { 1 } else { max_turns };
        let mut interaction = Interaction::new(initiator.clone(), responder.clone())?;
        interaction.push(Message::new(
            initiator,
            MessageString::question(1, record.question.trim()),
            responder,
        )?)?;
        Ok(Self {
            record: record.clone(),
            judge,
            background,
            interaction,
            state: SessionState {
                record_id: record.id.clone(),
                status: SessionStatus::Open,
                max_turns,
                turns_used: 0,
                classification: None,
                correct_at: None,
                error: None,
            },
            logs: Vec::new(),
            categorizer: "rules".to_string(),
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn record(&self) -> &DatasetRecord {
        &self.record
    }

    pub fn next_speaker(&self) -> Option<Speaker> {
        if self.state.status.is_final() {
            None
        } else if self.interaction.pending().is_some() {
            Some(Speaker::Responder)
        } else {
            Some(Speaker::Initiator)
        }
    }

    pub fn set_awaiting_human(&mut self, waiting: bool) {
        if !self.state.status.is_final() {
            self.state.status = if waiting { SessionStatus::AwaitingHuman } else { SessionStatus::Open };
        }
    }

    fn agent_matches(&self, speaker: Speaker, agent: &dyn Agent) -> bool {
        let expected = match speaker {
            Speaker::Initiator => self.interaction.initiator(),
            Speaker::Responder => self.interaction.responder(),
        };
        agent.id() == expected
    }

    /// Lets `agent`, which must be the next speaker, add one message.
    pub fn advance(&mut self, agent: &mut dyn Agent) -> Result<(), AgentError> {
        let Some(speaker) = self.next_speaker() else {
            return Err(AgentError::Policy("session is finished".into()));
        };
        if !self.agent_matches(speaker, agent) {
            return Err(AgentError::Policy(format!("it is not {}'s turn", agent.id())));
        }
        let turn = self.interaction.turn_count() + 1;
        let context = context_at(&self.interaction, agent.id(), turn, &self.background)?;
        let incoming = self
            .interaction
            .last_message()
            .cloned()
            .ok_or_else(|| AgentError::Policy("empty interaction".into()))?;
        let outcome = agent.respond(&context, &incoming);
        self.logs.extend(agent.take_log());
        let reply = outcome?;
        self.interaction.push(reply.clone())?;
        if self.state.status == SessionStatus::AwaitingHuman {
            self.state.status = SessionStatus::Open;
        }
        if speaker == Speaker::Responder {
            self.categorizer = agent.categorizer_name();
            self.close_turn(&reply);
        }
        Ok(())
    }

    fn close_turn(&mut self, reply: &Message) {
        let turn = self.interaction.turn_count();
        self.state.turns_used = turn;
        let correct = match reply.payload() {
            MessageString::Answer { texts, .. } => texts
                .iter()
                .any(|t| judge_correct(t, &self.record.gold_answers, &self.judge).unwrap_or(false)),
            _ => false,
        };
        if correct {
            self.state.correct_at = Some(turn);
        }
        if correct || reply.payload().is_termination() || turn >= self.state.max_turns {
            self.finish();
        }
    }

    /// Settles the classification and marks the session done.
    pub fn finish(&mut self) {
        if self.state.status.is_final() {
            return;
        }
        self.state.classification = Some(self.classify());
        self.state.status = SessionStatus::Done;
    }

    /// Marks the session failed, keeping the partial transcript.
    pub fn fail(&mut self, error: &AgentError) {
        if self.state.status.is_final() {
            return;
        }
        self.state.classification = Some(self.classify());
        self.state.error = Some(error.to_string());
        self.state.status = SessionStatus::Error;
    }

    /// Classification of the interaction as it stands. A syntactic single
    /// turn answer only counts when it was judged correct.
    pub fn classify(&self) -> QuestionStatus {
        match classify_initial_question(&self.interaction) {
            Ok(QuestionStatus::AnsweredSingleTurn) if self.state.correct_at != Some(1) => QuestionStatus::Unresolved,
            Ok(status) => status,
            Err(_) => QuestionStatus::Unresolved,
        }
    }

    pub fn into_session(self) -> Session {
        Session {
            state: self.state,
            interaction: self.interaction,
            background: self.background,
            logs: self.logs,
            categorizer: self.categorizer,
        }
    }
}

/// Runs one record to completion between two agents.
///
/// Agent failures end the session with status `Error`; only invalid
/// arguments are returned as errors.
pub fn run_interaction(
    record: &DatasetRecord,
    initiator: &mut dyn Agent,
    responder: &mut dyn Agent,
    judge: &JudgeConfig,
    max_turns: usize,
    background: &Background,
) -> Result<Session, ExperimentError> {
    initiator.bind_record(record);
    responder.bind_record(record);
    let mut run = SessionRun::start(
        record,
        initiator.id().clone(),
        responder.id().clone(),
        *judge,
        max_turns,
        background.clone(),
    )?;
    while let Some(speaker) = run.next_speaker() {
        let agent: &mut dyn Agent = match speaker {
            Speaker::Initiator => &mut *initiator,
            Speaker::Responder => &mut *responder,
        };
        if let Err(e) = run.advance(agent) {
            tracing::warn!(record = %record.id, error = %e, "session failed");
            run.fail(&e);
        }
    }
    Ok(run.into_session())
}
