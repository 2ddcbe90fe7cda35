use thiserror::Error;

use super::message::QuestionId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NotationError {
    #[error("malformed message string at byte {pos}: {reason}")]
    Malformed { pos: usize, reason: &'static str },
    #[error("{kind} must carry {expected} utterance(s), found {found}")]
    Arity {
        kind: &'static str,
        expected: &'static str,
        found: usize,
    },
    #[error("empty utterance at byte {pos}")]
    EmptyUtterance { pos: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("agent name must be nonempty")]
    EmptyAgentName,
    #[error("initiator and responder must be distinct agents, both are {0:?}")]
    SameAgent(String),
    #[error("invalid message payload: {0}")]
    InvalidPayload(String),
    #[error("message {position} must be sent by {expected:?}, got {found:?}")]
    WrongSender {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("message {position} must be addressed to {expected:?}, got {found:?}")]
    WrongReceiver {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("no message may follow a termination")]
    MessageAfterTermination,
    #[error("a turn cannot be opened with a termination")]
    TerminationOpensTurn,
    #[error("only a 1-step interaction is allowed with an oracle")]
    OracleMultiTurn,
    #[error("question id {id} does not exceed the last issued id {last}")]
    NonIncreasingQuestionId { id: QuestionId, last: QuestionId },
    #[error("answer id {0} does not refer to a question previously asked by the receiver")]
    UnknownAnswerId(QuestionId),
    #[error("agent {0:?} does not participate in this interaction")]
    NotAParticipant(String),
    #[error("turn index {index} out of range 1..={max}")]
    TurnOutOfRange { index: usize, max: usize },
    #[error("context for turn {index} needs {needed} messages but only {available} recorded")]
    ContextUnavailable {
        index: usize,
        needed: usize,
        available: usize,
    },
}
