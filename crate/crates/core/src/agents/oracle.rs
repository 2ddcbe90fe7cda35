use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_addressed, reply_to, Agent, AgentError};
use crate::datasets::DatasetRecord;
use crate::protocol::{AgentId, Background, Context, Message, MessageString, ProtocolError};

/// Lowercases, collapses whitespace and trims trailing `?`, `.` and `!`.
pub fn normalize_key(text: &str) -> String {
    let collapsed = text
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    collapsed
        .trim_end_matches(['?', '.', '!'])
        .trim_end()
        .to_string()
}

fn context_key(background: &Background) -> String {
    let mut parts: Vec<String> = background
        .statements()
        .iter()
        .map(|s| normalize_key(s))
        .collect();
    parts.sort();
    parts.join(" | ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub question: String,
    /// Background statements this entry is conditioned on; empty matches any
    /// background without a more specific entry.
    #[serde(default)]
    pub context: Vec<String>,
    pub answers: Vec<String>,
}

/// Ground truth keyed by `(question, context)`. An empty answer set stands
/// for "cannot be answered"; repeated answers are kept once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleTable {
    entries: BTreeMap<(String, String), Vec<String>>,
}

impl OracleTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<I, S>(&mut self, question: &str, context: &Background, answers: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set: Vec<String> = Vec::new();
        for a in answers.into_iter().map(Into::into) {
            if !set.contains(&a) {
                set.push(a);
            }
        }
        self.entries.insert((normalize_key(question), context_key(context)), set);
    }

    /// Exact `(question, context)` entry first, then the context-free entry
    /// for the question, else no answer.
    pub fn lookup(&self, question: &str, context: &Background) -> &[String] {
        let q = normalize_key(question);
        self.entries
            .get(&(q.clone(), context_key(context)))
            .or_else(|| self.entries.get(&(q, String::new())))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Context-free entries mapping each record's question to its gold set.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DatasetRecord>) -> Self {
        let mut t = Self::new();
        for r in records {
            t.insert(&r.question, &Background::new(), r.gold_answers.iter().cloned());
        }
        t
    }

    pub fn from_entries(entries: impl IntoIterator<Item = OracleEntry>) -> Self {
        let mut t = Self::new();
        for e in entries {
            t.insert(&e.question, &Background::from_statements(e.context), e.answers);
        }
        t
    }
}

/// Always-correct answerer restricted to one turn per interaction.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    id: AgentId,
    table: OracleTable,
}

impl OracleAgent {
    pub fn new(id: AgentId, table: OracleTable) -> Self {
        Self { id, table }
    }

    pub fn table(&self) -> &OracleTable {
        &self.table
    }
}

impl Agent for OracleAgent {
    fn id(&self) -> &AgentId {
        &self.id
    }

    fn respond(&mut self, context: &Context, incoming: &Message) -> Result<Message, AgentError> {
        check_addressed(&self.id, incoming)?;
        if context.visible_messages().len() > 1 {
            return Err(ProtocolError::OracleMultiTurn.into());
        }
        let MessageString::Question { id, text } = incoming.payload() else {
            return Err(AgentError::Policy("the oracle only answers questions".into()));
        };
        let answers = self.table.lookup(text, context.background());
        let payload = if answers.is_empty() {
            MessageString::Termination
        } else {
            MessageString::Answer {
                id: *id,
                texts: answers.to_vec(),
            }
        };
        reply_to(&self.id, incoming, payload)
    }
}
