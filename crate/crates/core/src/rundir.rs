//! Run directories.
//!
//! ```text
//! <dir>/run.json                         manifest and configuration
//! <dir>/records.jsonl                    the records, as qa-jsonl
//! <dir>/sessions.jsonl                   one session state per record
//! <dir>/transcripts/0000-<id>.jsonl      messages, then a classification line
//! <dir>/transcripts/0000-<id>.llm.jsonl  transport exchanges, when any
//! <dir>/report.json, report.txt
//! <dir>/sweep.json, sweep.txt            written by a sweep
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{open_qa_jsonl, write_qa_jsonl, DatasetError, DatasetManifest, DatasetRecord};
use crate::experiment::{
    emit_report, emit_sweep, AgentSpec, ExperimentConfig, ExperimentReport, ReportFormat, RunOutput, Session,
    SessionState, SweepTable,
};
use crate::protocol::transcript::{read_transcript_with_kinds, write_transcript, TranscriptError};
use crate::protocol::{AgentKind, Background, QuestionId};

pub const MANIFEST_FILE: &str = "run.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const TRANSCRIPTS_DIR: &str = "transcripts";

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Transcript {
        path: PathBuf,
        #[source]
        source: TranscriptError,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{0}")]
    Inconsistent(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunDirError + '_ {
    move |source| RunDirError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> RunDirError + '_ {
    move |source| RunDirError::Json {
        path: path.to_path_buf(),
        source,
    }
}

/// How a run was configured, enough to rebuild its agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub dataset: DatasetManifest,
    pub config: ExperimentConfig,
    pub responder: AgentSpec,
    pub clarifier: AgentSpec,
    #[serde(default)]
    pub model: Option<String>,
    pub temperature: f64,
    pub prompt_template: String,
    /// Canned completions file used instead of a live endpoint.
    #[serde(default)]
    pub llm_canned: Option<PathBuf>,
    #[serde(default)]
    pub tag: Option<String>,
    pub initiator_kind: AgentKind,
    pub responder_kind: AgentKind,
    pub fingerprint: String,
    #[serde(default)]
    pub rejected_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionLine {
    transcript: String,
    categorizer: String,
    background: Background,
    state: SessionState,
}

/// File-name safe form of a record id.
pub fn sanitize_id(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .take(60)
        .collect();
    if s.is_empty() {
        "record".to_string()
    } else {
        s
    }
}

fn transcript_name(index: usize, id: &str) -> String {
    format!("{index:04}-{}", sanitize_id(id))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunDirError> {
    let mut text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), RunDirError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Writes a finished run into `dir`, creating it if needed.
pub fn write_run(
    dir: &Path,
    manifest: &RunManifest,
    records: &[DatasetRecord],
    output: &RunOutput,
) -> Result<(), RunDirError> {
    if records.len() != output.sessions.len() {
        return Err(RunDirError::Inconsistent(format!(
            "{} records but {} sessions",
            records.len(),
            output.sessions.len()
        )));
    }
    let tdir = dir.join(TRANSCRIPTS_DIR);
    fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
    write_json(&dir.join(MANIFEST_FILE), manifest)?;

    let rpath = dir.join(RECORDS_FILE);
    let file = File::create(&rpath).map_err(io_err(&rpath))?;
    let mut out = BufWriter::new(file);
    write_qa_jsonl(&mut out, records).map_err(io_err(&rpath))?;
    out.flush().map_err(io_err(&rpath))?;

    let spath = dir.join(SESSIONS_FILE);
    let mut sessions_out = BufWriter::new(File::create(&spath).map_err(io_err(&spath))?);
    for (index, (record, session)) in records.iter().zip(&output.sessions).enumerate() {
        let name = transcript_name(index, &record.id);
        let tpath = tdir.join(format!("{name}.jsonl"));
        let mut out = BufWriter::new(File::create(&tpath).map_err(io_err(&tpath))?);
        let classification = session
            .state
            .classification
            .map(|c| c.to_record(QuestionId(1), &session.categorizer));
        write_transcript(&mut out, &session.interaction, classification.as_ref()).map_err(io_err(&tpath))?;
        out.flush().map_err(io_err(&tpath))?;

        if !session.logs.is_empty() {
            let lpath = tdir.join(format!("{name}.llm.jsonl"));
            let mut out = BufWriter::new(File::create(&lpath).map_err(io_err(&lpath))?);
            for entry in &session.logs {
                serde_json::to_writer(&mut out, entry).map_err(json_err(&lpath))?;
                out.write_all(b"\n").map_err(io_err(&lpath))?;
            }
            out.flush().map_err(io_err(&lpath))?;
        }

        let line = SessionLine {
            transcript: format!("{TRANSCRIPTS_DIR}/{name}.jsonl"),
            categorizer: session.categorizer.clone(),
            background: session.background.clone(),
            state: session.state.clone(),
        };
        serde_json::to_writer(&mut sessions_out, &line).map_err(json_err(&spath))?;
        sessions_out.write_all(b"\n").map_err(io_err(&spath))?;
    }
    sessions_out.flush().map_err(io_err(&spath))?;

    write_json(&dir.join("report.json"), &output.report)?;
    write_text(&dir.join("report.txt"), &emit_report(&output.report, ReportFormat::Text))
}

pub fn write_sweep(dir: &Path, table: &SweepTable) -> Result<(), RunDirError> {
    write_json(&dir.join("sweep.json"), table)?;
    write_text(&dir.join("sweep.txt"), &emit_sweep(table, ReportFormat::Text))
}

/// A run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub records: Vec<DatasetRecord>,
    pub output: RunOutput,
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest, RunDirError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(json_err(&path))
}

pub fn load_report(dir: &Path) -> Result<ExperimentReport, RunDirError> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(json_err(&path))
}

pub fn load_run(dir: &Path) -> Result<LoadedRun, RunDirError> {
    let manifest = load_manifest(dir)?;
    let records = open_qa_jsonl(&dir.join(RECORDS_FILE), &manifest.dataset.name)?;
    let report = load_report(dir)?;

    let spath = dir.join(SESSIONS_FILE);
    let reader = BufReader::new(File::open(&spath).map_err(io_err(&spath))?);
    let mut sessions = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(io_err(&spath))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: SessionLine = serde_json::from_str(&line).map_err(json_err(&spath))?;
        let tpath = dir.join(&entry.transcript);
        let file = File::open(&tpath).map_err(io_err(&tpath))?;
        let transcript = read_transcript_with_kinds(BufReader::new(file), manifest.initiator_kind, manifest.responder_kind)
            .map_err(|source| RunDirError::Transcript {
                path: tpath.clone(),
                source,
            })?;
        sessions.push(Session {
            state: entry.state,
            interaction: transcript.interaction,
            background: entry.background,
            logs: Vec::new(),
            categorizer: entry.categorizer,
        });
    }
    if sessions.len() != records.len() {
        return Err(RunDirError::Inconsistent(format!(
            "{} records but {} sessions in {}",
            records.len(),
            sessions.len(),
            dir.display()
        )));
    }
    for (r, s) in records.iter().zip(&sessions) {
        if r.id != s.state.record_id {
            return Err(RunDirError::Inconsistent(format!(
                "session for {} stored against record {}",
                s.state.record_id, r.id
            )));
        }
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        manifest,
        records,
        output: RunOutput { report, sessions },
    })
}
