use serde::{Deserialize, Serialize};

use super::error::ProtocolError;
use super::message::{AgentId, Message, MessageString, QuestionId};

/// A completed pair of messages: the opener from the initiator and the reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    first: Message,
    second: Message,
}

impl Turn {
    pub fn first(&self) -> &Message {
        &self.first
    }

    pub fn second(&self) -> &Message {
        &self.second
    }
}

/// An alternating sequence of turns between a fixed initiator and responder.
///
/// The initiator speaks at even message positions and the responder at odd
/// ones. An opener that has not been replied to yet is kept as the pending
/// half-turn. Every mutation goes through [`Interaction::push`], which keeps
/// the following invariants:
///
/// - no turn opens with a termination, and nothing follows a termination;
/// - question ids strictly increase across the whole interaction;
/// - an answer refers to a question previously asked by its receiver;
/// - an interaction with an oracle never grows past one turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    initiator: AgentId,
    responder: AgentId,
    turns: Vec<Turn>,
    pending: Option<Message>,
}

impl Interaction {
    pub fn new(initiator: AgentId, responder: AgentId) -> Result<Self, ProtocolError> {
        if initiator == responder {
            return Err(ProtocolError::SameAgent(initiator.name().to_string()));
        }
        Ok(Self {
            initiator,
            responder,
            turns: Vec::new(),
            pending: None,
        })
    }

    /// Builds an interaction by pushing every message in order.
    pub fn from_messages<I>(
        initiator: AgentId,
        responder: AgentId,
        messages: I,
    ) -> Result<Self, ProtocolError>
    where
        I: IntoIterator<Item = Message>,
    {
        let mut interaction = Self::new(initiator, responder)?;
        for msg in messages {
            interaction.push(msg)?;
        }
        Ok(interaction)
    }

    pub fn initiator(&self) -> &AgentId {
        &self.initiator
    }

    pub fn responder(&self) -> &AgentId {
        &self.responder
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    /// Number of completed turns, `k`.
    pub fn turn_count(&self) -> usize {
        self.turns.len()
    }

    pub fn pending(&self) -> Option<&Message> {
        self.pending.as_ref()
    }

    pub fn message_count(&self) -> usize {
        2 * self.turns.len() + usize::from(self.pending.is_some())
    }

    /// At least one turn and no half-open turn.
    pub fn is_complete(&self) -> bool {
        !self.turns.is_empty() && self.pending.is_none()
    }

    pub fn is_terminated(&self) -> bool {
        self.last_message()
            .is_some_and(|m| m.payload().is_termination())
    }

    pub fn is_participant(&self, agent: &AgentId) -> bool {
        *agent == self.initiator || *agent == self.responder
    }

    pub fn other(&self, agent: &AgentId) -> Option<&AgentId> {
        if *agent == self.initiator {
            Some(&self.responder)
        } else if *agent == self.responder {
            Some(&self.initiator)
        } else {
            None
        }
    }

    /// All messages in send order, including a pending opener.
    pub fn messages(&self) -> impl Iterator<Item = &Message> + '_ {
        self.turns
            .iter()
            .flat_map(|t| [&t.first, &t.second])
            .chain(self.pending.iter())
    }

    pub fn message_strings(&self) -> impl Iterator<Item = &MessageString> + '_ {
        self.messages().map(Message::payload)
    }

    pub fn last_message(&self) -> Option<&Message> {
        self.pending
            .as_ref()
            .or_else(|| self.turns.last().map(|t| &t.second))
    }

    /// The id the session should give to the next question.
    pub fn next_question_id(&self) -> QuestionId {
        next_question_id(self.messages())
    }

    /// Appends a message and returns the extended interaction, leaving
    /// `self` untouched.
    pub fn appended(&self, msg: Message) -> Result<Self, ProtocolError> {
        let mut next = self.clone();
        next.push(msg)?;
        Ok(next)
    }

    pub fn push(&mut self, msg: Message) -> Result<(), ProtocolError> {
        let position = self.message_count();
        if self.is_terminated() {
            return Err(ProtocolError::MessageAfterTermination);
        }
        let opening = self.pending.is_none();
        let (expected_sender, expected_receiver) = if opening {
            (&self.initiator, &self.responder)
        } else {
            (&self.responder, &self.initiator)
        };
        if msg.sender() != expected_sender {
            return Err(ProtocolError::WrongSender {
                position,
                expected: expected_sender.name().to_string(),
                found: msg.sender().name().to_string(),
            });
        }
        if msg.receiver() != expected_receiver {
            return Err(ProtocolError::WrongReceiver {
                position,
                expected: expected_receiver.name().to_string(),
                found: msg.receiver().name().to_string(),
            });
        }
        msg.payload().validate()?;
        if opening {
            if msg.payload().is_termination() {
                return Err(ProtocolError::TerminationOpensTurn);
            }
            if !self.turns.is_empty() && (self.initiator.is_oracle() || self.responder.is_oracle())
            {
                return Err(ProtocolError::OracleMultiTurn);
            }
        }
        match msg.payload() {
            MessageString::Question { id, .. } => {
                if let Some(last) = self.last_question_id() {
                    if *id <= last {
                        return Err(ProtocolError::NonIncreasingQuestionId { id: *id, last });
                    }
                }
            }
            MessageString::Answer { id, .. } => {
                let asked_by_receiver = self.messages().any(|m| {
                    m.sender() == msg.receiver()
                        && matches!(m.payload(), MessageString::Question { id: q, .. } if q == id)
                });
                if !asked_by_receiver {
                    return Err(ProtocolError::UnknownAnswerId(*id));
                }
            }
            _ => {}
        }

        match self.pending.take() {
            None => self.pending = Some(msg),
            Some(first) => self.turns.push(Turn { first, second: msg }),
        }
        Ok(())
    }

    fn last_question_id(&self) -> Option<QuestionId> {
        self.message_strings()
            .filter_map(|m| match m {
                MessageString::Question { id, .. } => Some(*id),
                _ => None,
            })
            .max()
    }

    /// The first question sent by the initiator: `(turn index from 1, id, text)`.
    /// A question in the pending half-turn reports index `k + 1`.
    pub fn initial_question(&self) -> Option<(usize, QuestionId, &str)> {
        self.turns
            .iter()
            .map(|t| &t.first)
            .chain(self.pending.iter())
            .enumerate()
            .find_map(|(i, m)| match m.payload() {
                MessageString::Question { id, text } => Some((i + 1, *id, text.as_str())),
                _ => None,
            })
    }

    /// Most recent question from `asker` that is visible in this interaction.
    pub fn latest_question_from(&self, asker: &AgentId) -> Option<(QuestionId, &str)> {
        latest_question_from(self.messages(), asker)
    }
}

pub(crate) fn next_question_id<'a>(messages: impl Iterator<Item = &'a Message>) -> QuestionId {
    let max = messages
        .filter_map(|m| match m.payload() {
            MessageString::Question { id, .. } => Some(id.0),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    QuestionId(max + 1)
}

pub(crate) fn latest_question_from<'a>(
    messages: impl Iterator<Item = &'a Message>,
    asker: &AgentId,
) -> Option<(QuestionId, &'a str)> {
    messages
        .filter(|m| m.sender() == asker)
        .filter_map(|m| match m.payload() {
            MessageString::Question { id, text } => Some((*id, text.as_str())),
            _ => None,
        })
        .last()
}
