//! Answer correctness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeMode {
    /// Normalized candidate equals a normalized gold answer.
    #[default]
    Exact,
    /// Normalized gold answer occurs in the candidate on word boundaries.
    Contains,
}

impl std::str::FromStr for JudgeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(JudgeMode::Exact),
            "contains" | "containment" => Ok(JudgeMode::Contains),
            other => Err(format!("unknown judge mode {other:?} (expected exact or contains)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeConfig {
    #[serde(default = "yes")]
    pub lowercase: bool,
    #[serde(default = "yes")]
    pub strip_punctuation: bool,
    #[serde(default = "yes")]
    pub strip_articles: bool,
    #[serde(default = "yes")]
    pub collapse_whitespace: bool,
    #[serde(default)]
    pub mode: JudgeMode,
}

fn yes() -> bool {
    true
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self::with_mode(JudgeMode::Exact)
    }
}

impl JudgeConfig {
    pub fn with_mode(mode: JudgeMode) -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            strip_articles: true,
            collapse_whitespace: true,
            mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error("candidate answer is empty")]
    EmptyCandidate,
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

pub fn normalize(text: &str, cfg: &JudgeConfig) -> String {
    let mut s = if cfg.lowercase { text.to_lowercase() } else { text.to_string() };
    if cfg.strip_punctuation {
        s.retain(|c| c.is_alphanumeric() || c.is_whitespace());
    }
    if cfg.strip_articles {
        s = s
            .split(' ')
            .filter(|w| !ARTICLES.iter().any(|a| w.eq_ignore_ascii_case(a)))
            .collect::<Vec<_>>()
            .join(" ");
    }
    if cfg.collapse_whitespace {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    s
}

/// True iff `candidate` matches any of `gold` under `cfg`.
pub fn judge_correct<S: AsRef<str>>(candidate: &str, gold: &[S], cfg: &JudgeConfig) -> Result<bool, JudgeError> {
    if candidate.trim().is_empty() {
        return Err(JudgeError::EmptyCandidate);
    }
    let cand = normalize(candidate, cfg);
    let padded = format!(" {cand} ");
    Ok(gold.iter().any(|g| {
        let g = normalize(g.as_ref(), cfg);
        if g.is_empty() {
            return false;
        }
        match cfg.mode {
            JudgeMode::Exact => cand == g,
            JudgeMode::Contains => padded.contains(&format!(" {g} ")),
        }
    }))
}
