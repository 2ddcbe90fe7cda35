//! Live sessions: a driver thread per session plus a watch channel of
//! snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use dialoggate::agents::{Agent, AgentError, HumanBridge, HumanBridgeAgent};
use dialoggate::datasets::DatasetRecord;
use dialoggate::experiment::{SessionRun, SessionStatus, Speaker};
use dialoggate::protocol::transcript::{
    append_classification, read_transcript_with_kinds, ClassificationRecord, MessageRecord,
};
use dialoggate::{AgentKind, Interaction, QuestionId};
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Mutex};

/// How long the driver blocks on the bridge before re-checking shutdown.
const POLL: Duration = Duration::from_millis(200);

/// Everything a reader may observe about a session.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub revision: u64,
    pub status: SessionStatus,
    pub interaction: Interaction,
    /// Revision at which each message appeared.
    pub message_revs: Vec<u64>,
    pub classification: Option<ClassificationRecord>,
    pub correct_at: Option<usize>,
    pub turns_used: usize,
    pub max_turns: usize,
    pub error: Option<String>,
    pub background: Vec<String>,
}

impl Snapshot {
    pub fn records_since(&self, since: Option<u64>) -> Vec<MessageRecord> {
        self.interaction
            .messages()
            .enumerate()
            .filter(|(i, _)| since.is_none_or(|r| self.message_revs[*i] > r))
            .map(|(i, m)| MessageRecord::from_message(i, m))
            .collect()
    }
}

/// Stored next to each transcript.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub record: DatasetRecord,
    pub responder: String,
    pub responder_kind: AgentKind,
    pub status: SessionStatus,
    #[serde(default)]
    pub correct_at: Option<usize>,
    #[serde(default)]
    pub error: Option<String>,
}

pub struct LiveSession {
    pub id: String,
    pub record: DatasetRecord,
    pub bridge: HumanBridge,
    pub ended_by_human: Arc<AtomicBool>,
    pub snapshots: watch::Receiver<Snapshot>,
    /// Serializes posts so each waits for its own message to land.
    pub post_lock: Mutex<()>,
}

impl LiveSession {
    pub fn snapshot(&self) -> Snapshot {
        self.snapshots.borrow().clone()
    }
}

pub(crate) struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn new(root: &Path) -> std::io::Result<Self> {
        let dir = root.join("sessions");
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    fn transcript_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.meta.json"))
    }

    pub fn write_meta(&self, meta: &SessionMeta) -> std::io::Result<()> {
        let path = self.meta_path(&meta.id);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(meta)?)?;
        fs::rename(tmp, path)
    }

    fn append(&self, id: &str, lines: &[MessageRecord], classification: Option<&ClassificationRecord>) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.transcript_path(id))?;
        let mut buf = Vec::new();
        for l in lines {
            serde_json::to_writer(&mut buf, l)?;
            buf.push(b'\n');
        }
        if let Some(c) = classification {
            append_classification(&mut buf, c)?;
        }
        f.write_all(&buf)?;
        f.sync_data()
    }

    /// Reads every stored session. Sessions that were still running when the
    /// service stopped come back as errors.
    pub fn load_all(&self) -> Vec<(SessionMeta, Snapshot)> {
        let mut out = Vec::new();
        let Ok(entries) = fs::read_dir(&self.dir) else {
            return out;
        };
        let mut metas: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".meta.json"))
            .collect();
        metas.sort();
        for path in metas {
            match self.load_one(&path) {
                Ok(pair) => out.push(pair),
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping stored session"),
            }
        }
        out
    }

    fn load_one(&self, meta_path: &Path) -> Result<(SessionMeta, Snapshot), String> {
        let text = fs::read_to_string(meta_path).map_err(|e| e.to_string())?;
        let mut meta: SessionMeta = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let file = File::open(self.transcript_path(&meta.id)).map_err(|e| e.to_string())?;
        let transcript = read_transcript_with_kinds(BufReader::new(file), AgentKind::Human, meta.responder_kind)
            .map_err(|e| e.to_string())?;
        if !meta.status.is_final() {
            meta.status = SessionStatus::Error;
            meta.error = Some("interrupted by a service restart".into());
            let _ = self.write_meta(&meta);
        }
        let n = transcript.interaction.message_count();
        let snapshot = Snapshot {
            revision: n as u64 + 1,
            status: meta.status,
            message_revs: (1..=n as u64).collect(),
            classification: transcript.classifications.last().cloned(),
            correct_at: meta.correct_at,
            turns_used: transcript.interaction.turn_count(),
            max_turns: transcript.interaction.turn_count(),
            error: meta.error.clone(),
            background: Vec::new(),
            interaction: transcript.interaction,
        };
        Ok((meta, snapshot))
    }
}

/// Publishes the run's current state, persisting new messages first.
struct Publisher {
    tx: watch::Sender<Snapshot>,
    store: Arc<Store>,
    meta: SessionMeta,
}

impl Publisher {
    fn publish(&mut self, run: &SessionRun, categorizer: &str) {
        let prev = self.tx.borrow().clone();
        let interaction = run.interaction().clone();
        let state = run.state();
        let count = interaction.message_count();
        let revision = prev.revision + 1;
        let new_records: Vec<MessageRecord> = interaction
            .messages()
            .enumerate()
            .skip(prev.interaction.message_count())
            .map(|(i, m)| MessageRecord::from_message(i, m))
            .collect();
        let mut message_revs = prev.message_revs.clone();
        message_revs.resize(count, revision);
        let status = if state.status.is_final() {
            state.status
        } else if run.next_speaker() == Some(Speaker::Initiator) {
            SessionStatus::AwaitingHuman
        } else {
            SessionStatus::Open
        };
        let classification = state
            .classification
            .unwrap_or_else(|| run.classify())
            .to_record(QuestionId(1), categorizer);
        let final_line = state.status.is_final().then_some(&classification);
        if let Err(e) = self.store.append(&self.meta.id, &new_records, final_line) {
            tracing::error!(session = %self.meta.id, error = %e, "failed to persist transcript");
        }
        if state.status.is_final() {
            self.meta.status = state.status;
            self.meta.error = state.error.clone();
            self.meta.correct_at = state.correct_at;
            if let Err(e) = self.store.write_meta(&self.meta) {
                tracing::error!(session = %self.meta.id, error = %e, "failed to persist session state");
            }
        }
        let snapshot = Snapshot {
            revision,
            status,
            interaction,
            message_revs,
            classification: Some(classification),
            correct_at: state.correct_at,
            turns_used: state.turns_used,
            max_turns: state.max_turns,
            error: state.error.clone(),
            background: run.background().statements().to_vec(),
        };
        self.tx.send_replace(snapshot);
    }
}

pub(crate) struct Launch {
    pub id: String,
    pub run: SessionRun,
    pub responder: Box<dyn Agent>,
    pub responder_spec: String,
    pub store: Arc<Store>,
    pub shutdown: Arc<AtomicBool>,
}

/// Persists the opening message and starts the driver thread.
pub(crate) fn launch(l: Launch) -> std::io::Result<Arc<LiveSession>> {
    let Launch {
        id,
        mut run,
        mut responder,
        responder_spec,
        store,
        shutdown,
    } = l;
    let meta = SessionMeta {
        id: id.clone(),
        record: run.record().clone(),
        responder: responder_spec,
        responder_kind: responder.id().kind(),
        status: SessionStatus::Open,
        correct_at: None,
        error: None,
    };
    store.write_meta(&meta)?;
    let initial = Snapshot {
        revision: 0,
        status: SessionStatus::Open,
        interaction: Interaction::new(run.interaction().initiator().clone(), run.interaction().responder().clone())
            .expect("participants were validated"),
        message_revs: Vec::new(),
        classification: None,
        correct_at: None,
        turns_used: 0,
        max_turns: run.state().max_turns,
        error: None,
        background: Vec::new(),
    };
    let (tx, rx) = watch::channel(initial);
    let mut publisher = Publisher { tx, store, meta };
    let categorizer = responder.categorizer_name();
    publisher.publish(&run, &categorizer);

    let bridge = HumanBridge::new();
    let ended_by_human = Arc::new(AtomicBool::new(false));
    let mut human = HumanBridgeAgent::new(run.interaction().initiator().clone(), bridge.clone(), POLL);
    let ended = ended_by_human.clone();
    let session_id = id.clone();
    let record = run.record().clone();
    let kept = record.clone();
    thread::Builder::new().name(format!("session-{id}")).spawn(move || {
        responder.bind_record(&record);
        while let Some(speaker) = run.next_speaker() {
            let outcome = match speaker {
                Speaker::Responder => run.advance(&mut *responder),
                Speaker::Initiator => {
                    run.set_awaiting_human(true);
                    run.advance(&mut human)
                }
            };
            match outcome {
                Ok(()) => {}
                Err(AgentError::AwaitingHuman) => {
                    if shutdown.load(Ordering::Relaxed) {
                        run.fail(&AgentError::BridgeClosed);
                    } else {
                        continue;
                    }
                }
                Err(AgentError::BridgeClosed) if ended.load(Ordering::SeqCst) => run.finish(),
                Err(e) => {
                    tracing::warn!(session = %session_id, error = %e, "session failed");
                    run.fail(&e);
                }
            }
            publisher.publish(&run, &categorizer);
        }
    })?;

    Ok(Arc::new(LiveSession {
        id,
        record: kept,
        bridge,
        ended_by_human,
        snapshots: rx,
        post_lock: Mutex::new(()),
    }))
}
