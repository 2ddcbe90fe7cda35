//! Messages, turns and interactions between a pair of agents.

mod context;
mod error;
mod interaction;
mod message;
mod notation;
mod qa;
pub mod transcript;

pub use context::{context_at, Background, Context};
pub use error::{NotationError, ProtocolError};
pub use interaction::{Interaction, Turn};
pub use message::{AgentId, AgentKind, Message, MessageKind, MessageString, QuestionId};
pub use notation::{parse_message_string, render_message_string};
pub use qa::{extract_qa_sequence, QaPair, QaSequence};
