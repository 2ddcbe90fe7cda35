//! Synthetic corpora with known outcomes.
//!
//! Each record carries a trajectory: how its responder behaves after 0, 1,
//! 2, ... clarifications. At context level `L` (the number of
//! clarifications the responder can see, plus one) the first `correct`
//! records answer correctly, the next `incomplete` reply with a
//! counter-question, the next `ambiguous` give a wrong answer and the rest
//! reply with an unhelpful statement. Past the last level every record is
//! answered correctly.

use serde::{Deserialize, Serialize};

use crate::agents::{PolicyRule, ReplyKind, ReplyTemplate, ScriptedPolicy, Trigger};
use crate::classifier::UtteranceCategory;
use crate::datasets::DatasetRecord;

/// Highest clarification index the generated clarifier knows how to follow.
const MAX_CLARIFICATIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub correct: usize,
    pub incomplete: usize,
    pub ambiguous: usize,
}

impl Level {
    pub const fn new(incomplete: usize, ambiguous: usize, correct: usize) -> Self {
        Self {
            correct,
            incomplete,
            ambiguous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Behaviour {
    Correct,
    CounterQuestion,
    WrongAnswer,
    Deflect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedCorpus {
    pub name: String,
    pub records: Vec<DatasetRecord>,
    pub responder: ScriptedPolicy,
    pub clarifier: ScriptedPolicy,
}

pub fn record_id(index: usize) -> String {
    format!("r{:03}", index + 1)
}

fn marker(j: usize, id: &str) -> String {
    format!("[clarify-{j}:{id}]")
}

fn behaviour(index: usize, level: &Level) -> Behaviour {
    if index < level.correct {
        Behaviour::Correct
    } else if index < level.correct + level.incomplete {
        Behaviour::CounterQuestion
    } else if index < level.correct + level.incomplete + level.ambiguous {
        Behaviour::WrongAnswer
    } else {
        Behaviour::Deflect
    }
}

fn reply(b: Behaviour, id: &str) -> ReplyTemplate {
    match b {
        Behaviour::Correct => ReplyTemplate::new(ReplyKind::Answer, [format!("answer {id}")]),
        Behaviour::CounterQuestion => ReplyTemplate::new(ReplyKind::Question, [format!("Which one do you mean for {id}?")]),
        Behaviour::WrongAnswer => ReplyTemplate::new(ReplyKind::Answer, [format!("guess {id}")]),
        Behaviour::Deflect => ReplyTemplate::new(ReplyKind::Statement, ["That is hard to say."]),
    }
}

/// Builds a corpus of `size` records following `levels`.
///
/// Correct counts must not decrease from one level to the next, so a record
/// once answered stays answered as context grows.
pub fn planted_corpus(name: &str, size: usize, levels: &[Level]) -> Result<PlantedCorpus, String> {
    if size == 0 {
        return Err("planted corpus needs at least one record".into());
    }
    if levels.is_empty() || levels.len() >= MAX_CLARIFICATIONS {
        return Err(format!("between 1 and {} levels", MAX_CLARIFICATIONS - 1));
    }
    for (i, l) in levels.iter().enumerate() {
        if l.correct + l.incomplete + l.ambiguous > size {
            return Err(format!("level {} plants more than {size} records", i + 1));
        }
        if i > 0 && l.correct < levels[i - 1].correct {
            return Err(format!("level {} resolves fewer records than level {i}", i + 1));
        }
    }
    let mut records = Vec::with_capacity(size);
    let mut rules = Vec::with_capacity(size * (levels.len() + 1));
    for index in 0..size {
        let id = record_id(index);
        records.push(DatasetRecord {
            id: id.clone(),
            question: format!("Planted question [{id}]?"),
            gold_answers: vec![format!("answer {id}")],
            passage: None,
            source: name.to_string(),
        });
        let tag = format!("[{id}]");
        // most informed level first
        for level in (1..=levels.len() + 1).rev() {
            let b = levels.get(level - 1).map_or(Behaviour::Correct, |l| behaviour(index, l));
            rules.push(PolicyRule {
                when: Trigger {
                    question_contains: Some(tag.clone()),
                    context_contains: (level > 1).then(|| marker(level - 1, &id)),
                    ..Trigger::default()
                },
                reply: reply(b, &id),
            });
        }
    }
    Ok(PlantedCorpus {
        name: name.to_string(),
        records,
        responder: ScriptedPolicy::new(rules, ReplyTemplate::termination()),
        clarifier: clarifier(),
    })
}

/// Sends the next `[clarify-j:<id>]` marker, as an answer when asked a
/// question and as a statement otherwise.
pub fn clarifier() -> ScriptedPolicy {
    let mut rules = Vec::new();
    let text = |j: usize| format!("{} Here is more detail.", marker(j, "{record_id}"));
    for j in (2..=MAX_CLARIFICATIONS).rev() {
        let seen = Some(marker(j - 1, "{record_id}"));
        rules.push(PolicyRule {
            when: Trigger {
                incoming: Some(UtteranceCategory::QuestionLike),
                context_contains: seen.clone(),
                ..Trigger::default()
            },
            reply: ReplyTemplate::new(ReplyKind::Answer, [text(j)]),
        });
        rules.push(PolicyRule {
            when: Trigger {
                context_contains: seen,
                ..Trigger::default()
            },
            reply: ReplyTemplate::new(ReplyKind::Statement, [text(j)]),
        });
    }
    rules.push(PolicyRule {
        when: Trigger {
            incoming: Some(UtteranceCategory::QuestionLike),
            ..Trigger::default()
        },
        reply: ReplyTemplate::new(ReplyKind::Answer, [text(1)]),
    });
    ScriptedPolicy::new(rules, ReplyTemplate::new(ReplyKind::Statement, [text(1)]))
}
