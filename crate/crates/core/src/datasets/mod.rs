//! QA records and benchmark loaders.
//!
//! Every supported layout is flattened to [`DatasetRecord`]. Rows that fail
//! to parse or validate are reported as [`Reject`]s rather than dropped;
//! more than 10% rejects fails the whole load.

mod adapters;

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapters::parse_rows;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub passage: Option<String>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyId,
    EmptyQuestion,
    EmptyGoldAnswers,
    BlankGoldAnswer(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => f.write_str("id empty"),
            Violation::EmptyQuestion => f.write_str("question empty"),
            Violation::EmptyGoldAnswers => f.write_str("gold_answers empty"),
            Violation::BlankGoldAnswer(i) => write!(f, "gold answer {i} blank"),
        }
    }
}

pub fn validate_record(record: &DatasetRecord) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    if record.id.trim().is_empty() {
        v.push(Violation::EmptyId);
    }
    if record.question.trim().is_empty() {
        v.push(Violation::EmptyQuestion);
    }
    if record.gold_answers.is_empty() {
        v.push(Violation::EmptyGoldAnswers);
    }
    for (i, g) in record.gold_answers.iter().enumerate() {
        if g.trim().is_empty() {
            v.push(Violation::BlankGoldAnswer(i));
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Supported on-disk layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// `{"id","question","answers":[..],"passage":str|null}` per line.
    QaJsonl,
    /// SQuAD v2 nested `data/paragraphs/qas` JSON.
    Squad,
    /// NQ-open lines: `{"question","answer":[..]}`.
    NqOpen,
    /// AmbigNQ JSON array with `annotations`.
    Ambignq,
    /// ShARC JSON array of rule snippets and follow-up questions.
    Sharc,
    /// MedDialog processed JSON: a list of dialogues, each a list of
    /// `"Patient: ..."` / `"Doctor: ..."` strings.
    Meddialog,
    /// MultiWOZ `data.json`: dialogue id to `{"log":[{"text"}, ..]}`.
    Multiwoz,
}

impl DatasetFormat {
    pub const ALL: [DatasetFormat; 7] = [
        DatasetFormat::QaJsonl,
        DatasetFormat::Squad,
        DatasetFormat::NqOpen,
        DatasetFormat::Ambignq,
        DatasetFormat::Sharc,
        DatasetFormat::Meddialog,
        DatasetFormat::Multiwoz,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetFormat::QaJsonl => "qa-jsonl",
            DatasetFormat::Squad => "squad",
            DatasetFormat::NqOpen => "nq-open",
            DatasetFormat::Ambignq => "ambignq",
            DatasetFormat::Sharc => "sharc",
            DatasetFormat::Meddialog => "meddialog",
            DatasetFormat::Multiwoz => "multiwoz",
        }
    }

    /// Whether records of this layout carry a context passage.
    pub fn passage_bearing(self) -> bool {
        matches!(
            self,
            DatasetFormat::Squad | DatasetFormat::Sharc | DatasetFormat::Multiwoz
        )
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetFormat::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| DatasetError::UnknownFormat(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub format: DatasetFormat,
    pub path: PathBuf,
    /// Expected number of records; filled in after loading when absent.
    pub record_count: Option<usize>,
    pub passage_bearing: bool,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, format: DatasetFormat, path: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            format,
            path: path.into(),
            record_count: None,
            passage_bearing: format.passage_bearing(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based row number in the source layout.
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub records: Vec<DatasetRecord>,
    pub rejects: Vec<Reject>,
}

impl LoadedDataset {
    pub fn total_rows(&self) -> usize {
        self.records.len() + self.rejects.len()
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown dataset format {0:?}")]
    UnknownFormat(String),
    #[error("not a valid {format} file: {reason}")]
    Layout { format: DatasetFormat, reason: String },
    #[error("{rejected} of {total} rows rejected, more than 10%")]
    TooManyRejects {
        rejected: usize,
        total: usize,
        rejects: Vec<Reject>,
    },
    #[error("manifest expects {expected} records, loaded {loaded}")]
    CountMismatch { expected: usize, loaded: usize },
    #[error("dataset is empty")]
    Empty,
}

/// A source row after layout parsing, before validation.
pub type RowResult = Result<DatasetRecord, String>;

pub fn load_dataset(manifest: &DatasetManifest) -> Result<LoadedDataset, DatasetError> {
    let text = fs::read_to_string(&manifest.path).map_err(|source| DatasetError::Unreadable {
        path: manifest.path.clone(),
        source,
    })?;
    let rows = parse_rows(manifest.format, &manifest.name, &text)?;
    collect(manifest.clone(), rows)
}

fn collect(mut manifest: DatasetManifest, rows: Vec<RowResult>) -> Result<LoadedDataset, DatasetError> {
    let total = rows.len();
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let outcome = row.and_then(|r| {
            validate_record(&r).map(|_| r).map_err(|v| {
                v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            })
        });
        match outcome {
            Ok(r) => records.push(r),
            Err(reason) => rejects.push(Reject { row: i + 1, reason }),
        }
    }
    if rejects.len() * 10 > total {
        return Err(DatasetError::TooManyRejects {
            rejected: rejects.len(),
            total,
            rejects,
        });
    }
    match manifest.record_count {
        Some(expected) if expected != records.len() => {
            return Err(DatasetError::CountMismatch {
                expected,
                loaded: records.len(),
            })
        }
        _ => manifest.record_count = Some(records.len()),
    }
    Ok(LoadedDataset {
        manifest,
        records,
        rejects,
    })
}

/// One line of the generic qa-jsonl layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaJsonlRow {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub passage: Option<String>,
}

impl From<&DatasetRecord> for QaJsonlRow {
    fn from(r: &DatasetRecord) -> Self {
        Self {
            id: r.id.clone(),
            question: r.question.clone(),
            answers: r.gold_answers.clone(),
            passage: r.passage.clone(),
        }
    }
}

pub fn write_qa_jsonl<W: Write>(mut out: W, records: &[DatasetRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &QaJsonlRow::from(r))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads qa-jsonl from any reader, tagging records with `source`.
pub fn read_qa_jsonl<R: BufRead>(input: R, source: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut text = String::new();
    for line in input.lines() {
        let line = line.map_err(|source| DatasetError::Unreadable {
            path: PathBuf::from("<reader>"),
            source,
        })?;
        text.push_str(&line);
        text.push('\n');
    }
    let rows = parse_rows(DatasetFormat::QaJsonl, source, &text)?;
    let manifest = DatasetManifest::new(source, DatasetFormat::QaJsonl, "<reader>");
    Ok(collect(manifest, rows)?.records)
}

pub fn open_qa_jsonl(path: &Path, source: &str) -> Result<Vec<DatasetRecord>, DatasetError> {
    let file = fs::File::open(path).map_err(|e| DatasetError::Unreadable {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_qa_jsonl(BufReader::new(file), source)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(q: &str, gold: &[&str]) -> DatasetRecord {
        DatasetRecord {
            id: "x".into(),
            question: q.into(),
            gold_answers: gold.iter().map(|s| s.to_string()).collect(),
            passage: None,
            source: "t".into(),
        }
    }

    #[test]
    fn validation() {
        assert_eq!(validate_record(&record("q", &["a"])), Ok(()));
        let v = validate_record(&record("", &[])).unwrap_err();
        assert_eq!(v, vec![Violation::EmptyQuestion, Violation::EmptyGoldAnswers]);
        assert_eq!(v[0].to_string(), "question empty");
        assert_eq!(v[1].to_string(), "gold_answers empty");
    }

    #[test]
    fn format_names() {
        for f in DatasetFormat::ALL {
            assert_eq!(f.as_str().parse::<DatasetFormat>().unwrap(), f);
        }
        assert!(matches!(
            "csv".parse::<DatasetFormat>(),
            Err(DatasetError::UnknownFormat(_))
        ));
    }

    #[test]
    fn one_line_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        fs::write(
            &path,
            r#"{"id":"a1","question":"Where was the first known government in the Western world to have a representative government?","answers":["Roman Republic"],"passage":null}"#,
        )
        .unwrap();
        let loaded = load_dataset(&DatasetManifest::new("ambig", DatasetFormat::QaJsonl, &path)).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.manifest.record_count, Some(1));
        let r = &loaded.records[0];
        assert!(r.question.starts_with("Where was the first known government"));
        assert_eq!(r.gold_answers, vec!["Roman Republic"]);
    }

    #[test]
    fn rejects_are_reported_and_capped() {
        let good = r#"{"id":"g","question":"q","answers":["a"],"passage":null}"#;
        let bad = r#"{"id":"b","question":"","answers":["a"],"passage":null}"#;
        let mut lines: Vec<&str> = vec![good; 10];
        lines.push(bad);
        let rows = parse_rows(DatasetFormat::QaJsonl, "t", &lines.join("\n")).unwrap();
        let m = DatasetManifest::new("t", DatasetFormat::QaJsonl, "mem");
        let loaded = collect(m.clone(), rows).unwrap();
        assert_eq!(loaded.records.len(), 10);
        assert_eq!(loaded.rejects, vec![Reject { row: 11, reason: "question empty".into() }]);
        assert_eq!(loaded.total_rows(), 11);

        let rows = parse_rows(DatasetFormat::QaJsonl, "t", &[good, bad, "{nope"].join("\n")).unwrap();
        assert!(matches!(
            collect(m, rows),
            Err(DatasetError::TooManyRejects { rejected: 2, total: 3, .. })
        ));
    }

    #[test]
    fn manifest_count_is_checked() {
        let rows = vec![Ok(record("q", &["a"]))];
        let mut m = DatasetManifest::new("t", DatasetFormat::QaJsonl, "mem");
        m.record_count = Some(2);
        assert!(matches!(
            collect(m, rows),
            Err(DatasetError::CountMismatch { expected: 2, loaded: 1 })
        ));
    }

    #[test]
    fn unreadable() {
        let m = DatasetManifest::new("t", DatasetFormat::QaJsonl, "/nonexistent/x.jsonl");
        assert!(matches!(load_dataset(&m), Err(DatasetError::Unreadable { .. })));
    }
}
