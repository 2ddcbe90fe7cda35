use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentError, OracleAgent};
use crate::protocol::{context_at, AgentId, Background, Interaction, Message, MessageString};

/// What a one-step oracle consultation says about a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "answers", rename_all = "snake_case")]
pub enum OracleVerdict {
    Incomplete,
    Ambiguous(Vec<String>),
    Answerable(String),
}

/// Reads the verdict off a finished one-step oracle interaction.
pub fn verdict_of(interaction: &Interaction) -> Option<OracleVerdict> {
    let turn = interaction.turns().first()?;
    Some(match turn.second().payload() {
        MessageString::Termination => OracleVerdict::Incomplete,
        MessageString::Answer { texts, .. } => match texts.as_slice() {
            [] => OracleVerdict::Incomplete,
            [one] => OracleVerdict::Answerable(one.clone()),
            many => OracleVerdict::Ambiguous(many.to_vec()),
        },
        _ => return None,
    })
}

/// Asks `question` once and returns the one-turn transcript.
pub fn oracle_consult(
    question: &str,
    oracle: &mut OracleAgent,
    asker: &AgentId,
    background: &Background,
) -> Result<Interaction, AgentError> {
    let mut interaction = Interaction::new(asker.clone(), oracle.id().clone())?;
    let opener = Message::new(asker.clone(), MessageString::question(1, question), oracle.id().clone())?;
    interaction.push(opener.clone())?;
    let context = context_at(&interaction, oracle.id(), 1, background)?;
    let reply = oracle.respond(&context, &opener)?;
    interaction.push(reply)?;
    Ok(interaction)
}

/// Classifies `question` against the oracle's ground truth.
pub fn oracle_classify(
    question: &str,
    oracle: &mut OracleAgent,
    background: &Background,
) -> Result<OracleVerdict, AgentError> {
    let asker = if oracle.id().name() == "asker" {
        AgentId::machine("asker-2")
    } else {
        AgentId::machine("asker")
    };
    let interaction = oracle_consult(question, oracle, &asker, background)?;
    verdict_of(&interaction).ok_or_else(|| AgentError::Policy("oracle reply is neither an answer nor a termination".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::OracleTable;

    fn height_oracle() -> OracleAgent {
        let mut t = OracleTable::new();
        t.insert("What is the height of y", &Background::new(), ["+2", "-2"]);
        t.insert(
            "What is the height of y",
            &Background::from_statements(["Height has to be positive."]),
            ["y=+2"],
        );
        t.insert("Can I get it?", &Background::new(), Vec::<String>::new());
        OracleAgent::new(AgentId::oracle("oracle"), t)
    }

    #[test]
    fn three_verdicts() {
        let mut o = height_oracle();
        assert_eq!(oracle_classify("Can I get it?", &mut o, &Background::new()).unwrap(), OracleVerdict::Incomplete);
        assert_eq!(
            oracle_classify("What is the height of y", &mut o, &Background::new()).unwrap(),
            OracleVerdict::Ambiguous(vec!["+2".into(), "-2".into()])
        );
        let bg = Background::from_statements(["Height has to be positive."]);
        assert_eq!(
            oracle_classify("What is the height of y", &mut o, &bg).unwrap(),
            OracleVerdict::Answerable("y=+2".into())
        );
    }

    #[test]
    fn consultation_transcript_renders() {
        let mut o = height_oracle();
        let bg = Background::from_statements(["Height has to be positive."]);
        let i = oracle_consult("What is the height of y", &mut o, &AgentId::human("h"), &bg).unwrap();
        let rendered: Vec<String> = i.message_strings().map(|m| m.to_string()).collect();
        assert_eq!(rendered, ["?1(What is the height of y)", "!1(y=+2)"]);
    }

    #[test]
    fn verdict_serde() {
        let v = OracleVerdict::Answerable("y=+2".into());
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"verdict":"answerable","answers":"y=+2"}"#);
        assert_eq!(serde_json::to_string(&OracleVerdict::Incomplete).unwrap(), r#"{"verdict":"incomplete"}"#);
    }
}
