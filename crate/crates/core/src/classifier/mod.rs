//! Syntactic question classification and oracle verdicts.

mod categorize;
mod detect;
mod oracle;

pub use categorize::{categorize_utterance, Categorizer, RuleCategorizer, UtteranceCategory};
pub use detect::{
    classify_initial_question, detect_possibly_ambiguous, detect_possibly_incomplete,
    ClassifyError, Evidence, QuestionStatus,
};
pub use oracle::{oracle_classify, oracle_consult, verdict_of, OracleVerdict};
