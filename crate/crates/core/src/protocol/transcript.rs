//! Line-delimited transcript files.
//!
//! Each message is one JSON object with keys in this order:
//!
//! ```text
//! {"seq":0,"sender":"h","receiver":"m","kind":"q","id":1,"texts":["What is the height of y"]}
//! ```
//!
//! A classification record may follow the messages:
//!
//! ```text
//! {"qid":1,"status":"possibly_ambiguous","evidence":[3,4],"categorizer":"rules"}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::error::ProtocolError;
use super::interaction::Interaction;
use super::message::{AgentId, AgentKind, Message, MessageKind, MessageString, QuestionId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub seq: usize,
    pub sender: String,
    pub receiver: String,
    pub kind: MessageKind,
    pub id: Option<u64>,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub qid: u64,
    pub status: String,
    pub evidence: Option<[usize; 2]>,
    pub categorizer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TranscriptLine {
    Message(MessageRecord),
    Classification(ClassificationRecord),
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: expected seq {expected}, found {found}")]
    Sequence {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Protocol {
        line: usize,
        #[source]
        source: ProtocolError,
    },
    #[error("transcript has no messages")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MessageRecord {
    pub fn from_message(seq: usize, msg: &Message) -> Self {
        Self {
            seq,
            sender: msg.sender().name().to_string(),
            receiver: msg.receiver().name().to_string(),
            kind: msg.payload().kind(),
            id: msg.payload().id().map(|id| id.0),
            texts: msg.payload().texts().into_iter().map(String::from).collect(),
        }
    }

    pub fn to_payload(&self) -> Result<MessageString, String> {
        let id = || {
            self.id
                .map(QuestionId)
                .ok_or_else(|| format!("{} record needs an id", self.kind.as_str()))
        };
        let no_id = || match self.id {
            Some(_) => Err(format!("{} record takes no id", self.kind.as_str())),
            None => Ok(()),
        };
        match self.kind {
            MessageKind::Termination => {
                no_id()?;
                if !self.texts.is_empty() {
                    return Err("termination carries no texts".into());
                }
                Ok(MessageString::Termination)
            }
            MessageKind::Question => {
                let id = id()?;
                match self.texts.as_slice() {
                    [text] => Ok(MessageString::Question {
                        id,
                        text: text.clone(),
                    }),
                    other => Err(format!(
                        "question must carry exactly 1 text, found {}",
                        other.len()
                    )),
                }
            }
            MessageKind::Answer => Ok(MessageString::Answer {
                id: id()?,
                texts: self.texts.clone(),
            }),
            MessageKind::Statement => {
                no_id()?;
                Ok(MessageString::Statement {
                    texts: self.texts.clone(),
                })
            }
        }
    }
}

pub fn records_from_interaction(interaction: &Interaction) -> Vec<MessageRecord> {
    interaction
        .messages()
        .enumerate()
        .map(|(seq, m)| MessageRecord::from_message(seq, m))
        .collect()
}

/// One JSON object per line, each line terminated by `\n`.
pub fn write_transcript<W: Write>(
    mut out: W,
    interaction: &Interaction,
    classification: Option<&ClassificationRecord>,
) -> std::io::Result<()> {
    for rec in records_from_interaction(interaction) {
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    if let Some(c) = classification {
        append_classification(&mut out, c)?;
    }
    Ok(())
}

pub fn append_classification<W: Write>(
    mut out: W,
    classification: &ClassificationRecord,
) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, classification)?;
    out.write_all(b"\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub interaction: Interaction,
    pub classifications: Vec<ClassificationRecord>,
}

/// Reads a transcript, taking the sender of the first message as initiator.
///
/// Kinds are not stored on disk: the initiator is loaded as a human and the
/// responder as a machine. Use [`read_transcript_with_kinds`] to override.
pub fn read_transcript<R: BufRead>(input: R) -> Result<Transcript, TranscriptError> {
    read_transcript_with_kinds(input, AgentKind::Human, AgentKind::Machine)
}

pub fn read_transcript_with_kinds<R: BufRead>(
    input: R,
    initiator_kind: AgentKind,
    responder_kind: AgentKind,
) -> Result<Transcript, TranscriptError> {
    let mut interaction: Option<Interaction> = None;
    let mut classifications = Vec::new();
    let mut expected_seq = 0;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TranscriptLine =
            serde_json::from_str(&line).map_err(|source| TranscriptError::Json {
                line: line_no,
                source,
            })?;
        let rec = match parsed {
            TranscriptLine::Classification(c) => {
                classifications.push(c);
                continue;
            }
            TranscriptLine::Message(rec) => rec,
        };
        if rec.seq != expected_seq {
            return Err(TranscriptError::Sequence {
                line: line_no,
                expected: expected_seq,
                found: rec.seq,
            });
        }
        expected_seq += 1;
        let protocol = |source| TranscriptError::Protocol {
            line: line_no,
            source,
        };
        let current = match interaction.as_mut() {
            Some(i) => i,
            None => {
                let a = AgentId::new(rec.sender.clone(), initiator_kind).map_err(protocol)?;
                let b = AgentId::new(rec.receiver.clone(), responder_kind).map_err(protocol)?;
                interaction.insert(Interaction::new(a, b).map_err(protocol)?)
            }
        };
        let payload = rec.to_payload().map_err(|reason| TranscriptError::Record {
            line: line_no,
            reason,
        })?;
        let (sender, receiver) = resolve(current, &rec.sender, &rec.receiver).ok_or_else(|| {
            TranscriptError::Record {
                line: line_no,
                reason: format!("unknown agents {:?} -> {:?}", rec.sender, rec.receiver),
            }
        })?;
        let msg = Message::new(sender, payload, receiver).map_err(protocol)?;
        current.push(msg).map_err(protocol)?;
    }
    Ok(Transcript {
        interaction: interaction.ok_or(TranscriptError::Empty)?,
        classifications,
    })
}

fn resolve(i: &Interaction, sender: &str, receiver: &str) -> Option<(AgentId, AgentId)> {
    let find = |name: &str| {
        [i.initiator(), i.responder()]
            .into_iter()
            .find(|a| a.name() == name)
            .cloned()
    };
    Some((find(sender)?, find(receiver)?))
}
