use serde::{Deserialize, Serialize};

use super::interaction::Interaction;
use super::message::{AgentId, MessageString, QuestionId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub id: QuestionId,
    pub question: String,
    /// Union of every matching-id answer, first occurrence order, no repeats.
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSequence {
    pub pairs: Vec<QaPair>,
}

impl QaSequence {
    /// The set of questions, in ask order.
    pub fn questions(&self) -> Vec<&str> {
        self.pairs.iter().map(|p| p.question.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

/// Question/answer pairs for questions sent by `from_agent`, each paired with
/// the union of answers carrying the same id from the other participant.
///
/// An agent that took no part in the interaction asked nothing, so it gets an
/// empty sequence.
pub fn extract_qa_sequence(interaction: &Interaction, from_agent: &AgentId) -> QaSequence {
    let Some(other) = interaction.other(from_agent) else {
        return QaSequence::default();
    };
    let mut pairs: Vec<QaPair> = interaction
        .messages()
        .filter(|m| m.sender() == from_agent)
        .filter_map(|m| match m.payload() {
            MessageString::Question { id, text } => Some(QaPair {
                id: *id,
                question: text.clone(),
                answers: Vec::new(),
            }),
            _ => None,
        })
        .collect();
    for msg in interaction.messages().filter(|m| m.sender() == other) {
        if let MessageString::Answer { id, texts } = msg.payload() {
            if let Some(pair) = pairs.iter_mut().find(|p| p.id == *id) {
                for t in texts {
                    if !pair.answers.contains(t) {
                        pair.answers.push(t.clone());
                    }
                }
            }
        }
    }
    QaSequence { pairs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Message;

    #[test]
    fn statements_only_yield_nothing() {
        let h = AgentId::human("h");
        let m = AgentId::machine("m");
        let i = Interaction::from_messages(
            h.clone(),
            m.clone(),
            [
                Message::new(h.clone(), MessageString::statement(["a"]), m.clone()).unwrap(),
                Message::new(m.clone(), MessageString::statement(["ok"]), h.clone()).unwrap(),
            ],
        )
        .unwrap();
        assert!(extract_qa_sequence(&i, &h).is_empty());
        assert!(extract_qa_sequence(&i, &m).is_empty());
        assert!(extract_qa_sequence(&i, &AgentId::human("x")).is_empty());
    }
}
