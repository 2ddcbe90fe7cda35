//! Agents that take part in interactions.
//!
//! Every agent answers one incoming message with exactly one reply, given
//! the context it is entitled to see at that turn.

mod human;
mod llm;
mod oracle;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::DatasetRecord;
use crate::protocol::{AgentId, Context, Message, MessageString, ProtocolError};

pub use human::{BridgeError, HumanBridge, HumanBridgeAgent, HumanDraft, HumanInputKind};
pub use llm::{
    CannedRule, CannedTransport, ChatMessage, ChatRequest, ExchangeLog, HttpTransport, LlmAgent,
    PromptTemplate, RetryPolicy, Transport, TransportError, LLM_KEY_ENV, LLM_URL_ENV,
};
pub use oracle::{normalize_key, OracleAgent, OracleEntry, OracleTable};
pub use scripted::{PolicyRule, ReplyKind, ReplyTemplate, ScriptedAgent, ScriptedPolicy, Trigger};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("message for {receiver:?} delivered to {agent:?}")]
    Misaddressed { agent: String, receiver: String },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("no human input before the timeout")]
    AwaitingHuman,
    #[error("human bridge closed")]
    BridgeClosed,
    #[error("policy error: {0}")]
    Policy(String),
}

impl AgentError {
    /// Whether retrying the same call later could succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, AgentError::Transport { .. } | AgentError::AwaitingHuman)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponderKind {
    Llm,
    Oracle,
    Scripted,
    Human,
}

/// Per-agent settings. Temperature defaults to 0.7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub kind: ResponderKind,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "AgentConfig::default_temperature")]
    pub temperature: f64,
    #[serde(default = "AgentConfig::default_max_turns")]
    pub max_turns: usize,
    #[serde(default = "AgentConfig::default_template")]
    pub prompt_template: String,
    #[serde(default)]
    pub refusal_phrases: Vec<String>,
}

impl AgentConfig {
    pub const DEFAULT_TEMPERATURE: f64 = 0.7;

    fn default_temperature() -> f64 {
        Self::DEFAULT_TEMPERATURE
    }

    fn default_max_turns() -> usize {
        3
    }

    fn default_template() -> String {
        PromptTemplate::DEFAULT_ID.to_string()
    }

    pub fn new(kind: ResponderKind) -> Self {
        Self {
            kind,
            model: None,
            temperature: Self::DEFAULT_TEMPERATURE,
            max_turns: Self::default_max_turns(),
            prompt_template: Self::default_template(),
            refusal_phrases: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_turns == 0 {
            return Err("max_turns must be at least 1".into());
        }
        if self.kind == ResponderKind::Llm && self.model.as_deref().is_none_or(str::is_empty) {
            return Err("llm agents need a model name".into());
        }
        Ok(())
    }
}

pub trait Agent: Send {
    fn id(&self) -> &AgentId;

    /// Called before a session on `record` starts.
    fn bind_record(&mut self, _record: &DatasetRecord) {}

    /// Produces the single message that answers `incoming`.
    fn respond(&mut self, context: &Context, incoming: &Message) -> Result<Message, AgentError>;

    /// Drains transport exchange records kept since the last call.
    fn take_log(&mut self) -> Vec<ExchangeLog> {
        Vec::new()
    }

    /// Categorizer name recorded alongside classifications.
    fn categorizer_name(&self) -> String {
        "rules".to_string()
    }
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn id(&self) -> &AgentId {
        (**self).id()
    }

    fn bind_record(&mut self, record: &DatasetRecord) {
        (**self).bind_record(record)
    }

    fn respond(&mut self, context: &Context, incoming: &Message) -> Result<Message, AgentError> {
        (**self).respond(context, incoming)
    }

    fn take_log(&mut self) -> Vec<ExchangeLog> {
        (**self).take_log()
    }

    fn categorizer_name(&self) -> String {
        (**self).categorizer_name()
    }
}

fn check_addressed(me: &AgentId, incoming: &Message) -> Result<(), AgentError> {
    if incoming.receiver() != me {
        return Err(AgentError::Misaddressed {
            agent: me.name().to_string(),
            receiver: incoming.receiver().name().to_string(),
        });
    }
    Ok(())
}

fn reply_to(me: &AgentId, incoming: &Message, payload: MessageString) -> Result<Message, AgentError> {
    Ok(Message::new(me.clone(), payload, incoming.sender().clone())?)
}

/// An agent opens a turn when it sees an even number of messages.
fn opens_turn(context: &Context) -> bool {
    context.visible_messages().len() % 2 == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let c: AgentConfig = serde_json::from_str(r#"{"kind":"llm","model":"gpt-3.5-turbo"}"#).unwrap();
        assert_eq!(c.temperature, 0.7);
        assert!(c.validate().is_ok());
        let mut bad = c.clone();
        bad.temperature = 2.5;
        assert!(bad.validate().is_err());
        bad = c.clone();
        bad.max_turns = 0;
        assert!(bad.validate().is_err());
        assert!(AgentConfig::new(ResponderKind::Llm).validate().is_err());
    }
}
