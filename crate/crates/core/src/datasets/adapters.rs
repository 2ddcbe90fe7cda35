//! Layout adapters. Each turns raw file text into per-row results.

use serde::Deserialize;
use serde_json::Value;

use super::{DatasetError, DatasetFormat, DatasetRecord, QaJsonlRow, RowResult};

pub fn parse_rows(
    format: DatasetFormat,
    source: &str,
    text: &str,
) -> Result<Vec<RowResult>, DatasetError> {
    let layout = |reason: String| DatasetError::Layout { format, reason };
    match format {
        DatasetFormat::QaJsonl => Ok(lines(text)
            .map(|(_, line)| {
                serde_json::from_str::<QaJsonlRow>(line)
                    .map(|row| DatasetRecord {
                        id: row.id,
                        question: row.question,
                        gold_answers: dedup(row.answers),
                        passage: row.passage,
                        source: source.to_string(),
                    })
                    .map_err(|e| e.to_string())
            })
            .collect()),
        DatasetFormat::NqOpen => Ok(lines(text)
            .map(|(n, line)| nq_open_row(n, line, source))
            .collect()),
        DatasetFormat::Squad => {
            let doc: Value = serde_json::from_str(text).map_err(|e| layout(e.to_string()))?;
            squad_rows(&doc, source).map_err(layout)
        }
        DatasetFormat::Ambignq => {
            let items = json_array(text).map_err(layout)?;
            Ok(items.into_iter().map(|v| ambignq_row(v, source)).collect())
        }
        DatasetFormat::Sharc => {
            let items = json_array(text).map_err(layout)?;
            Ok(items.into_iter().map(|v| sharc_row(v, source)).collect())
        }
        DatasetFormat::Meddialog => {
            let items = json_array(text).map_err(layout)?;
            Ok(items
                .into_iter()
                .enumerate()
                .map(|(i, v)| meddialog_row(i + 1, &v, source))
                .collect())
        }
        DatasetFormat::Multiwoz => {
            let doc: Value = serde_json::from_str(text).map_err(|e| layout(e.to_string()))?;
            let Value::Object(map) = doc else {
                return Err(layout("expected an object keyed by dialogue id".into()));
            };
            Ok(map
                .into_iter()
                .map(|(id, v)| multiwoz_row(id, &v, source))
                .collect())
        }
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

fn json_array(text: &str) -> Result<Vec<Value>, String> {
    match serde_json::from_str::<Value>(text).map_err(|e| e.to_string())? {
        Value::Array(items) => Ok(items),
        _ => Err("expected a top-level array".into()),
    }
}

fn dedup(answers: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for a in answers {
        let a = a.trim().to_string();
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}

fn nq_open_row(n: usize, line: &str, source: &str) -> RowResult {
    #[derive(Deserialize)]
    struct Row {
        id: Option<String>,
        question: String,
        answer: Vec<String>,
    }
    let row: Row = serde_json::from_str(line).map_err(|e| e.to_string())?;
    Ok(DatasetRecord {
        id: row.id.unwrap_or_else(|| format!("{source}-{n}")),
        question: row.question,
        gold_answers: dedup(row.answer),
        passage: None,
        source: source.to_string(),
    })
}

/// Flattens `data[].paragraphs[].qas[]`. Questions marked `is_impossible`
/// have no gold answer by construction and are left out.
fn squad_rows(doc: &Value, source: &str) -> Result<Vec<RowResult>, String> {
    #[derive(Deserialize)]
    struct Span {
        text: String,
    }
    #[derive(Deserialize)]
    struct Qa {
        id: String,
        question: String,
        #[serde(default)]
        answers: Vec<Span>,
        #[serde(default)]
        is_impossible: bool,
    }
    let data = doc
        .get("data")
        .and_then(Value::as_array)
        .ok_or("missing `data` array")?;
    let mut rows = Vec::new();
    for article in data {
        let paragraphs = article
            .get("paragraphs")
            .and_then(Value::as_array)
            .ok_or("article without `paragraphs`")?;
        for p in paragraphs {
            let context = p.get("context").and_then(Value::as_str).map(String::from);
            let Some(qas) = p.get("qas").and_then(Value::as_array) else {
                rows.push(Err("paragraph without `qas`".to_string()));
                continue;
            };
            for qa in qas {
                match Qa::deserialize(qa) {
                    Ok(qa) if qa.is_impossible => {}
                    Ok(qa) => rows.push(Ok(DatasetRecord {
                        id: qa.id,
                        question: qa.question,
                        gold_answers: dedup(qa.answers.into_iter().map(|s| s.text)),
                        passage: context.clone(),
                        source: source.to_string(),
                    })),
                    Err(e) => rows.push(Err(e.to_string())),
                }
            }
        }
    }
    Ok(rows)
}

/// Gold answers are the union over single-answer and multiple-QA
/// annotations.
fn ambignq_row(v: Value, source: &str) -> RowResult {
    #[derive(Deserialize)]
    struct Pair {
        answer: Vec<String>,
    }
    #[derive(Deserialize)]
    #[serde(tag = "type")]
    enum Annotation {
        #[serde(rename = "singleAnswer")]
        Single { answer: Vec<String> },
        #[serde(rename = "multipleQAs")]
        Multiple {
            #[serde(rename = "qaPairs")]
            qa_pairs: Vec<Pair>,
        },
    }
    #[derive(Deserialize)]
    struct Item {
        id: String,
        question: String,
        annotations: Vec<Annotation>,
    }
    let item = Item::deserialize(v).map_err(|e| e.to_string())?;
    let answers = item.annotations.into_iter().flat_map(|a| match a {
        Annotation::Single { answer } => answer,
        Annotation::Multiple { qa_pairs } => qa_pairs.into_iter().flat_map(|p| p.answer).collect(),
    });
    Ok(DatasetRecord {
        id: item.id,
        question: item.question,
        gold_answers: dedup(answers),
        passage: None,
        source: source.to_string(),
    })
}

/// The rule snippet becomes the passage; the verdict is the gold answer.
fn sharc_row(v: Value, source: &str) -> RowResult {
    #[derive(Deserialize)]
    struct Item {
        utterance_id: String,
        snippet: String,
        question: String,
        answer: String,
    }
    let item = Item::deserialize(v).map_err(|e| e.to_string())?;
    Ok(DatasetRecord {
        id: item.utterance_id,
        question: item.question,
        gold_answers: dedup([item.answer]),
        passage: Some(item.snippet),
        source: source.to_string(),
    })
}

/// First patient utterance is the question, first doctor utterance the gold
/// answer. Dialogues are either a list of prefixed strings or an object
/// with an `utterances` list.
fn meddialog_row(n: usize, v: &Value, source: &str) -> RowResult {
    let (id, utterances) = match v {
        Value::Array(items) => (None, items),
        Value::Object(obj) => (
            obj.get("id").and_then(Value::as_str).map(String::from),
            obj.get("utterances")
                .and_then(Value::as_array)
                .ok_or("dialogue object without `utterances`")?,
        ),
        _ => return Err("dialogue must be an array or object".into()),
    };
    let turn = |prefix: &str| {
        utterances.iter().filter_map(Value::as_str).find_map(|u| {
            let u = u.trim();
            u.get(..prefix.len())
                .filter(|p| p.eq_ignore_ascii_case(prefix))
                .map(|_| u[prefix.len()..].trim().to_string())
        })
    };
    let question = turn("patient:").ok_or("no patient utterance")?;
    let answer = turn("doctor:").ok_or("no doctor utterance")?;
    Ok(DatasetRecord {
        id: id.unwrap_or_else(|| format!("{source}-{n}")),
        question,
        gold_answers: vec![answer],
        passage: None,
        source: source.to_string(),
    })
}

/// First user turn is the question and first system turn the gold answer;
/// the goal description, stripped of markup, is the passage.
fn multiwoz_row(id: String, v: &Value, source: &str) -> RowResult {
    let log = v
        .get("log")
        .and_then(Value::as_array)
        .ok_or("dialogue without `log`")?;
    let text = |i: usize| {
        log.get(i)
            .and_then(|t| t.get("text"))
            .and_then(Value::as_str)
            .map(|s| s.trim().to_string())
    };
    let question = text(0).ok_or("log has no user turn")?;
    let answer = text(1).ok_or("log has no system turn")?;
    let passage = v
        .get("goal")
        .and_then(|g| g.get("message"))
        .and_then(|m| match m {
            Value::String(s) => Some(s.clone()),
            Value::Array(parts) => Some(
                parts
                    .iter()
                    .filter_map(Value::as_str)
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            _ => None,
        })
        .map(|m| strip_markup(&m))
        .filter(|m| !m.is_empty());
    Ok(DatasetRecord {
        id: id.trim_end_matches(".json").to_string(),
        question,
        gold_answers: vec![answer],
        passage,
        source: source.to_string(),
    })
}

fn strip_markup(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for c in s.chars() {
        match c {
            '<' => in_tag = true,
            '>' => in_tag = false,
            c if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}
