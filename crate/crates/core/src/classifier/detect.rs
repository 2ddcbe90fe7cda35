use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::transcript::ClassificationRecord;
use crate::protocol::{Interaction, MessageString, QuestionId, Turn};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassifyError {
    #[error("question {0} was not asked by the initiator")]
    QuestionNotFound(QuestionId),
    #[error("interaction has no initial question")]
    NoInitialQuestion,
}

/// The pair of 1-based turn indices `(i, i + 1)` that matched a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub first: usize,
    pub second: usize,
}

impl Evidence {
    fn at(zero_based: usize) -> Self {
        Self {
            first: zero_based + 1,
            second: zero_based + 2,
        }
    }

    pub fn as_array(self) -> [usize; 2] {
        [self.first, self.second]
    }
}

/// Outcome for the initial question. Evidence exists exactly for the two
/// flagged variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuestionStatus {
    AnsweredSingleTurn,
    PossiblyIncomplete(Evidence),
    PossiblyAmbiguous(Evidence),
    Unresolved,
}

impl QuestionStatus {
    pub fn label(&self) -> &'static str {
        match self {
            QuestionStatus::AnsweredSingleTurn => "answered_single_turn",
            QuestionStatus::PossiblyIncomplete(_) => "possibly_incomplete",
            QuestionStatus::PossiblyAmbiguous(_) => "possibly_ambiguous",
            QuestionStatus::Unresolved => "unresolved",
        }
    }

    pub fn evidence(&self) -> Option<Evidence> {
        match self {
            QuestionStatus::PossiblyIncomplete(e) | QuestionStatus::PossiblyAmbiguous(e) => {
                Some(*e)
            }
            _ => None,
        }
    }

    pub fn from_parts(label: &str, evidence: Option<[usize; 2]>) -> Option<Self> {
        let ev = evidence.map(|[first, second]| Evidence { first, second });
        match (label, ev) {
            ("answered_single_turn", None) => Some(QuestionStatus::AnsweredSingleTurn),
            ("possibly_incomplete", Some(e)) => Some(QuestionStatus::PossiblyIncomplete(e)),
            ("possibly_ambiguous", Some(e)) => Some(QuestionStatus::PossiblyAmbiguous(e)),
            ("unresolved", None) => Some(QuestionStatus::Unresolved),
            _ => None,
        }
    }

    pub fn to_record(&self, qid: QuestionId, categorizer: &str) -> ClassificationRecord {
        ClassificationRecord {
            qid: qid.0,
            status: self.label().to_string(),
            evidence: self.evidence().map(Evidence::as_array),
            categorizer: categorizer.to_string(),
        }
    }
}

impl fmt::Display for QuestionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.evidence() {
            Some(e) => write!(f, "{} (turns {}, {})", self.label(), e.first, e.second),
            None => f.write_str(self.label()),
        }
    }
}

impl Serialize for QuestionStatus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            status: &'static str,
            evidence: Option<[usize; 2]>,
        }
        Repr {
            status: self.label(),
            evidence: self.evidence().map(Evidence::as_array),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuestionStatus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            status: String,
            evidence: Option<[usize; 2]>,
        }
        let r = Repr::deserialize(d)?;
        QuestionStatus::from_parts(&r.status, r.evidence).ok_or_else(|| {
            serde::de::Error::custom(format!(
                "inconsistent status {:?} with evidence {:?}",
                r.status, r.evidence
            ))
        })
    }
}

fn ensure_asked(interaction: &Interaction, qid: QuestionId) -> Result<(), ClassifyError> {
    let initiator = interaction.initiator();
    let asked = interaction.messages().any(|m| {
        m.sender() == initiator
            && matches!(m.payload(), MessageString::Question { id, .. } if *id == qid)
    });
    if asked {
        Ok(())
    } else {
        Err(ClassifyError::QuestionNotFound(qid))
    }
}

fn turn_pairs(interaction: &Interaction) -> impl Iterator<Item = (usize, &Turn, &Turn)> {
    interaction
        .turns()
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, &w[0], &w[1]))
}

/// Looks for a turn where the initiator asks `?α`, the responder counters
/// with its own question `?β`, and the initiator opens the next turn with
/// `!β`. The responder's reply in that next turn can be anything.
///
/// `qid` must be a question the initiator asked; the scan covers every turn
/// and the earliest match is returned as evidence.
pub fn detect_possibly_incomplete(
    interaction: &Interaction,
    qid: QuestionId,
) -> Result<Option<Evidence>, ClassifyError> {
    ensure_asked(interaction, qid)?;
    Ok(turn_pairs(interaction).find_map(|(i, now, next)| {
        let MessageString::Question { .. } = now.first().payload() else {
            return None;
        };
        let MessageString::Question { id: beta, .. } = now.second().payload() else {
            return None;
        };
        matches!(next.first().payload(), MessageString::Answer { id, .. } if id == beta)
            .then(|| Evidence::at(i))
    }))
}

/// Looks for a turn where the initiator asks `?α`, the responder answers
/// `!α`, and the initiator opens the next turn with a statement.
pub fn detect_possibly_ambiguous(
    interaction: &Interaction,
    qid: QuestionId,
) -> Result<Option<Evidence>, ClassifyError> {
    ensure_asked(interaction, qid)?;
    Ok(turn_pairs(interaction).find_map(|(i, now, next)| {
        let MessageString::Question { id: alpha, .. } = now.first().payload() else {
            return None;
        };
        let answered =
            matches!(now.second().payload(), MessageString::Answer { id, .. } if id == alpha);
        (answered && matches!(next.first().payload(), MessageString::Statement { .. }))
            .then(|| Evidence::at(i))
    }))
}

/// Classifies the initiator's first question from completed turns only.
///
/// Possibly-incomplete is tested before possibly-ambiguous, so an interaction
/// showing both patterns is reported as incomplete. A question whose turn is
/// the last completed turn and was answered directly is
/// `AnsweredSingleTurn`; anything else is `Unresolved`.
pub fn classify_initial_question(interaction: &Interaction) -> Result<QuestionStatus, ClassifyError> {
    let (_, qid, _) = interaction
        .initial_question()
        .ok_or(ClassifyError::NoInitialQuestion)?;
    if let Some(e) = detect_possibly_incomplete(interaction, qid)? {
        return Ok(QuestionStatus::PossiblyIncomplete(e));
    }
    if let Some(e) = detect_possibly_ambiguous(interaction, qid)? {
        return Ok(QuestionStatus::PossiblyAmbiguous(e));
    }
    let turns = interaction.turns();
    let answered_last = turns.last().is_some_and(|t| {
        matches!(t.first().payload(), MessageString::Question { id, .. } if *id == qid)
            && matches!(t.second().payload(), MessageString::Answer { id, .. } if *id == qid)
    });
    Ok(if answered_last {
        QuestionStatus::AnsweredSingleTurn
    } else {
        QuestionStatus::Unresolved
    })
}
