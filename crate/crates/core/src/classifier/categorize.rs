//! Maps free-text replies onto message categories.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceCategory {
    QuestionLike,
    AnswerLike,
    StatementLike,
    TerminationLike,
}

impl fmt::Display for UtteranceCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UtteranceCategory::QuestionLike => "question_like",
            UtteranceCategory::AnswerLike => "answer_like",
            UtteranceCategory::StatementLike => "statement_like",
            UtteranceCategory::TerminationLike => "termination_like",
        })
    }
}

/// Pluggable categorizer. Implementations must be reentrant.
pub trait Categorizer: Send + Sync {
    /// `in_reply_position` is true when the speaker owes an answer to a
    /// question from the other participant.
    fn categorize(&self, text: &str, in_reply_position: bool) -> UtteranceCategory;

    /// Name recorded in classification records, `rules` or `model:<name>`.
    fn name(&self) -> String;
}

const INTERROGATIVES: &[&str] = &[
    "what", "which", "who", "whom", "whose", "where", "when", "why", "how", "is", "are", "was",
    "were", "am", "do", "does", "did", "can", "could", "would", "will", "should", "shall", "may",
    "might", "have", "has",
];

const REFUSALS: &[&str] = &[
    "i cannot answer",
    "i can't answer",
    "i can not answer",
    "i am unable to answer",
    "i'm unable to answer",
    "i do not know",
    "i don't know",
    "cannot be determined",
    "unable to determine",
    "not enough information",
];

const ACKNOWLEDGEMENTS: &[&str] = &[
    "ok",
    "okay",
    "sure",
    "got it",
    "understood",
    "noted",
    "thanks",
    "thank you",
    "alright",
];

/// Deterministic rule set, applied in order:
///
/// 1. the final sentence ends with `?`, or starts with an interrogative word
///    and has no closing `.` or `!` → question;
/// 2. a refusal phrase occurs anywhere → termination;
/// 3. the whole text is an acknowledgement such as "ok" → statement;
/// 4. in reply position → answer;
/// 5. otherwise → statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCategorizer {
    pub interrogatives: Vec<String>,
    pub refusal_phrases: Vec<String>,
    pub acknowledgements: Vec<String>,
}

impl Default for RuleCategorizer {
    fn default() -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            interrogatives: own(INTERROGATIVES),
            refusal_phrases: own(REFUSALS),
            acknowledgements: own(ACKNOWLEDGEMENTS),
        }
    }
}

impl RuleCategorizer {
    pub fn with_refusal_phrases(mut self, phrases: impl IntoIterator<Item = String>) -> Self {
        self.refusal_phrases = phrases.into_iter().map(|p| p.to_lowercase()).collect();
        self
    }

    fn is_question(&self, text: &str) -> bool {
        let trimmed = text.trim_end();
        if trimmed.ends_with('?') {
            return true;
        }
        if trimmed.ends_with('.') || trimmed.ends_with('!') {
            return false;
        }
        let last_sentence = trimmed
            .rsplit(['.', '!', '?'])
            .next()
            .unwrap_or(trimmed)
            .trim();
        let first_word = last_sentence
            .split(|c: char| !c.is_alphanumeric() && c != '\'')
            .find(|w| !w.is_empty())
            .map(str::to_lowercase);
        first_word.is_some_and(|w| self.interrogatives.iter().any(|i| *i == w))
    }
}

fn squash(text: &str) -> String {
    text.to_lowercase()
        .replace('\u{2019}', "'")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl Categorizer for RuleCategorizer {
    fn categorize(&self, text: &str, in_reply_position: bool) -> UtteranceCategory {
        if self.is_question(text) {
            return UtteranceCategory::QuestionLike;
        }
        let lower = squash(text);
        if self.refusal_phrases.iter().any(|p| lower.contains(p.as_str())) {
            return UtteranceCategory::TerminationLike;
        }
        let bare = lower.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());
        if self.acknowledgements.iter().any(|a| a == bare) {
            return UtteranceCategory::StatementLike;
        }
        if in_reply_position {
            UtteranceCategory::AnswerLike
        } else {
            UtteranceCategory::StatementLike
        }
    }

    fn name(&self) -> String {
        "rules".to_string()
    }
}

/// Categorizes with the default rule set.
pub fn categorize_utterance(text: &str, in_reply_position: bool) -> UtteranceCategory {
    RuleCategorizer::default().categorize(text, in_reply_position)
}
