use serde::{Deserialize, Serialize};

use super::error::ProtocolError;
use super::interaction::{latest_question_from, next_question_id, Interaction};
use super::message::{AgentId, Message, MessageString, QuestionId};

/// Prior statements an agent holds before an interaction starts.
///
/// Behaves as a set (duplicates are dropped) but keeps insertion order so
/// prompts render deterministically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Background(Vec<String>);

impl Background {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_statements<I, S>(statements: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut b = Self::new();
        for s in statements {
            b.insert(s);
        }
        b
    }

    /// Adds a statement; blank and duplicate statements are ignored.
    pub fn insert(&mut self, statement: impl Into<String>) -> bool {
        let s = statement.into();
        if s.trim().is_empty() || self.0.contains(&s) {
            return false;
        }
        self.0.push(s);
        true
    }

    pub fn statements(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_subset_of(&self, other: &Background) -> bool {
        self.0.iter().all(|s| other.0.contains(s))
    }

    pub fn union(&self, other: &Background) -> Background {
        let mut out = self.clone();
        for s in &other.0 {
            out.insert(s.clone());
        }
        out
    }
}

/// What one agent can see at one turn: its background plus a message prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    agent: AgentId,
    turn_index: usize,
    background: Background,
    visible: Vec<Message>,
}

impl Context {
    /// A context for an agent that has seen nothing but its background.
    pub fn initial(agent: AgentId, background: Background) -> Self {
        Self {
            agent,
            turn_index: 1,
            background,
            visible: Vec::new(),
        }
    }

    pub fn agent(&self) -> &AgentId {
        &self.agent
    }

    pub fn turn_index(&self) -> usize {
        self.turn_index
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn visible_messages(&self) -> &[Message] {
        &self.visible
    }

    pub fn message_strings(&self) -> impl Iterator<Item = &MessageString> + '_ {
        self.visible.iter().map(Message::payload)
    }

    /// Whether `needle` occurs in any background statement or visible utterance.
    pub fn contains_text(&self, needle: &str) -> bool {
        self.background.statements().iter().any(|s| s.contains(needle))
            || self
                .message_strings()
                .any(|m| m.texts().iter().any(|t| t.contains(needle)))
    }

    pub fn next_question_id(&self) -> QuestionId {
        next_question_id(self.visible.iter())
    }

    /// Most recent visible question asked by the other participant.
    pub fn pending_question_for_me(&self) -> Option<(QuestionId, &str)> {
        let other = self
            .visible
            .iter()
            .find(|m| *m.sender() != self.agent)
            .map(|m| m.sender().clone())?;
        latest_question_from(self.visible.iter(), &other)
    }

    /// The first visible question, which the experiment treats as the
    /// question under study.
    pub fn initial_question(&self) -> Option<&str> {
        self.message_strings().find_map(|m| match m {
            MessageString::Question { text, .. } => Some(text.as_str()),
            _ => None,
        })
    }

    /// Background and visible messages of `self` are contained in `other`'s.
    pub fn is_subset_of(&self, other: &Context) -> bool {
        self.background.is_subset_of(&other.background)
            && self.visible.len() <= other.visible.len()
            && self.visible[..] == other.visible[..self.visible.len()]
    }
}

/// Context of `agent` on turn `turn_index` (1-based).
///
/// The initiator sees the first `2i - 2` messages, the responder the first
/// `2i - 1`. Valid indices run to `k + 1`, provided the needed prefix has
/// been recorded.
pub fn context_at(
    interaction: &Interaction,
    agent: &AgentId,
    turn_index: usize,
    background: &Background,
) -> Result<Context, ProtocolError> {
    let max = interaction.turn_count() + 1;
    if turn_index == 0 || turn_index > max {
        return Err(ProtocolError::TurnOutOfRange {
            index: turn_index,
            max,
        });
    }
    let needed = if agent == interaction.initiator() {
        2 * turn_index - 2
    } else if agent == interaction.responder() {
        2 * turn_index - 1
    } else {
        return Err(ProtocolError::NotAParticipant(agent.name().to_string()));
    };
    let available = interaction.message_count();
    if needed > available {
        return Err(ProtocolError::ContextUnavailable {
            index: turn_index,
            needed,
            available,
        });
    }
    Ok(Context {
        agent: agent.clone(),
        turn_index,
        background: background.clone(),
        visible: interaction.messages().take(needed).cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h() -> AgentId {
        AgentId::human("h")
    }
    fn m() -> AgentId {
        AgentId::machine("m")
    }

    /// Three turns: two statements acknowledged, then the height question.
    fn example_one() -> Interaction {
        let msgs = [
            (h(), MessageString::statement(["Child x has a height is 4 ft."]), m()),
            (m(), MessageString::statement(["ok"]), h()),
            (
                h(),
                MessageString::statement([
                    "The height of child y is the square root of the height of child x",
                ]),
                m(),
            ),
            (m(), MessageString::statement(["ok"]), h()),
            (h(), MessageString::question(1, "What is the height of y"), m()),
            (m(), MessageString::answer(1, ["y is +2 or -2"]), h()),
        ];
        Interaction::from_messages(
            h(),
            m(),
            msgs.into_iter().map(|(s, p, r)| Message::new(s, p, r).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn initiator_turn_one_sees_background_only() {
        let b = Background::from_statements(["prior"]);
        let c = context_at(&example_one(), &h(), 1, &b).unwrap();
        assert_eq!(c.background(), &b);
        assert!(c.visible_messages().is_empty());
    }

    #[test]
    fn responder_turn_three_sees_five_messages() {
        let i = example_one();
        let c = context_at(&i, &m(), 3, &Background::new()).unwrap();
        let expected: Vec<_> = i.message_strings().take(5).cloned().collect();
        assert_eq!(c.message_strings().cloned().collect::<Vec<_>>(), expected);
        assert_eq!(
            c.message_strings().last(),
            Some(&MessageString::question(1, "What is the height of y"))
        );
    }

    #[test]
    fn initiator_turn_three_sees_four_messages() {
        let i = example_one();
        let c = context_at(&i, &h(), 3, &Background::new()).unwrap();
        let all: Vec<_> = i.messages().cloned().collect();
        assert_eq!(c.visible_messages(), &all[..4]);
    }

    #[test]
    fn range_and_participants() {
        let i = example_one();
        assert!(matches!(
            context_at(&i, &h(), 0, &Background::new()),
            Err(ProtocolError::TurnOutOfRange { .. })
        ));
        assert!(matches!(
            context_at(&i, &h(), 5, &Background::new()),
            Err(ProtocolError::TurnOutOfRange { .. })
        ));
        // k + 1 is fine for the initiator (all 6 messages) but the responder
        // would need a 7th, unsent message
        assert!(context_at(&i, &h(), 4, &Background::new()).is_ok());
        assert!(matches!(
            context_at(&i, &m(), 4, &Background::new()),
            Err(ProtocolError::ContextUnavailable { .. })
        ));
        assert!(matches!(
            context_at(&i, &AgentId::human("z"), 1, &Background::new()),
            Err(ProtocolError::NotAParticipant(_))
        ));
    }

    #[test]
    fn monotone_in_turn_index() {
        let i = example_one();
        let b = Background::from_statements(["b"]);
        for agent in [h(), m()] {
            for t in 1..3 {
                let a = context_at(&i, &agent, t, &b).unwrap();
                let c = context_at(&i, &agent, t + 1, &b).unwrap();
                assert!(a.is_subset_of(&c));
            }
        }
    }

    #[test]
    fn background_is_a_set() {
        let mut b = Background::from_statements(["a", "b", "a"]);
        assert_eq!(b.len(), 2);
        assert!(!b.insert(""));
        assert!(b.insert("c"));
        assert_eq!(b.statements(), ["a", "b", "c"]);
    }
}
