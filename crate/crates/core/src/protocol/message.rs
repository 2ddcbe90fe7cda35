use std::fmt;

use serde::{Deserialize, Serialize};

use super::error::ProtocolError;
use super::notation::render_message_string;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Human,
    Machine,
    Oracle,
    Scripted,
}

/// Identity of one side of an interaction.
///
/// Two ids denote the same agent when their names match; the kind only
/// drives protocol restrictions (an oracle admits a single turn).
#[derive(Debug, Clone, Eq, Hash, Serialize, Deserialize)]
pub struct AgentId {
    name: String,
    kind: AgentKind,
}

impl AgentId {
    pub fn new(name: impl Into<String>, kind: AgentKind) -> Result<Self, ProtocolError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(ProtocolError::EmptyAgentName);
        }
        Ok(Self { name, kind })
    }

    /// Panics on an empty name; meant for literal identifiers.
    pub fn human(name: &str) -> Self {
        Self::new(name, AgentKind::Human).expect("literal agent name")
    }

    pub fn machine(name: &str) -> Self {
        Self::new(name, AgentKind::Machine).expect("literal agent name")
    }

    pub fn oracle(name: &str) -> Self {
        Self::new(name, AgentKind::Oracle).expect("literal agent name")
    }

    pub fn scripted(name: &str) -> Self {
        Self::new(name, AgentKind::Scripted).expect("literal agent name")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn is_oracle(&self) -> bool {
        self.kind == AgentKind::Oracle
    }
}

impl PartialEq for AgentId {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub u64);

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Wire name of each message-string category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    #[serde(rename = "term")]
    Termination,
    #[serde(rename = "q")]
    Question,
    #[serde(rename = "a")]
    Answer,
    #[serde(rename = "stmt")]
    Statement,
}

impl MessageKind {
    pub const ALL: [MessageKind; 4] = [
        MessageKind::Termination,
        MessageKind::Question,
        MessageKind::Answer,
        MessageKind::Statement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Termination => "term",
            MessageKind::Question => "q",
            MessageKind::Answer => "a",
            MessageKind::Statement => "stmt",
        }
    }
}

/// Payload of a message: termination, a single question, zero or more
/// answers to an earlier question, or one or more statements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageString {
    Termination,
    Question { id: QuestionId, text: String },
    Answer { id: QuestionId, texts: Vec<String> },
    Statement { texts: Vec<String> },
}

impl MessageString {
    pub fn question(id: u64, text: impl Into<String>) -> Self {
        MessageString::Question {
            id: QuestionId(id),
            text: text.into(),
        }
    }

    pub fn answer<I, S>(id: u64, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MessageString::Answer {
            id: QuestionId(id),
            texts: texts.into_iter().map(Into::into).collect(),
        }
    }

    pub fn statement<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MessageString::Statement {
            texts: texts.into_iter().map(Into::into).collect(),
        }
    }

    pub fn kind(&self) -> MessageKind {
        match self {
            MessageString::Termination => MessageKind::Termination,
            MessageString::Question { .. } => MessageKind::Question,
            MessageString::Answer { .. } => MessageKind::Answer,
            MessageString::Statement { .. } => MessageKind::Statement,
        }
    }

    pub fn id(&self) -> Option<QuestionId> {
        match self {
            MessageString::Question { id, .. } | MessageString::Answer { id, .. } => Some(*id),
            _ => None,
        }
    }

    /// Utterances carried by the payload, in order.
    pub fn texts(&self) -> Vec<&str> {
        match self {
            MessageString::Termination => Vec::new(),
            MessageString::Question { text, .. } => vec![text.as_str()],
            MessageString::Answer { texts, .. } | MessageString::Statement { texts } => {
                texts.iter().map(String::as_str).collect()
            }
        }
    }

    pub fn is_termination(&self) -> bool {
        matches!(self, MessageString::Termination)
    }

    /// Checks utterance arity and rejects empty utterances.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if let MessageString::Statement { texts } = self {
            if texts.is_empty() {
                return Err(ProtocolError::InvalidPayload(
                    "statement needs at least one utterance".into(),
                ));
            }
        }
        if self.texts().iter().any(|t| t.is_empty()) {
            return Err(ProtocolError::InvalidPayload("empty utterance".into()));
        }
        Ok(())
    }
}

impl fmt::Display for MessageString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_message_string(self))
    }
}

/// A `(sender, payload, receiver)` triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    sender: AgentId,
    payload: MessageString,
    receiver: AgentId,
}

impl Message {
    pub fn new(
        sender: AgentId,
        payload: MessageString,
        receiver: AgentId,
    ) -> Result<Self, ProtocolError> {
        if sender == receiver {
            return Err(ProtocolError::SameAgent(sender.name));
        }
        payload.validate()?;
        Ok(Self {
            sender,
            payload,
            receiver,
        })
    }

    pub fn sender(&self) -> &AgentId {
        &self.sender
    }

    pub fn receiver(&self) -> &AgentId {
        &self.receiver
    }

    pub fn payload(&self) -> &MessageString {
        &self.payload
    }

    pub fn into_payload(self) -> MessageString {
        self.payload
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.sender, self.payload, self.receiver)
    }
}
