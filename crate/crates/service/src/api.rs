use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::Json;
use dialoggate::agents::{
    Agent, HttpTransport, HumanDraft, HumanInputKind, LlmAgent, OracleAgent, OracleTable, ScriptedAgent,
    ScriptedPolicy, Transport,
};
use dialoggate::datasets::DatasetRecord;
use dialoggate::experiment::{
    resolve_policy, AgentSpec, JudgeConfig, JudgeMode, SessionRun, SessionStatus, RESPONDER_NAME,
};
use dialoggate::protocol::transcript::{ClassificationRecord, MessageRecord};
use dialoggate::protocol::context_at;
use dialoggate::{AgentId, Background, Message};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::live::{launch, Launch, LiveSession, Snapshot};
use crate::AppState;

/// How long a post waits for the driver to take its message.
const ACK_TIMEOUT: Duration = Duration::from_secs(10);
const DEFAULT_WAIT_MS: u64 = 20_000;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Ad-hoc question; ignored when `record` is given.
    #[serde(default)]
    pub question: Option<String>,
    #[serde(default)]
    pub record: Option<dialoggate::datasets::QaJsonlRow>,
    #[serde(default)]
    pub gold: Vec<String>,
    #[serde(default)]
    pub passage: Option<String>,
    /// Initial background statements visible to both sides.
    #[serde(default)]
    pub background: Vec<String>,
    /// `llm`, `oracle` or `scripted:<policy>`.
    #[serde(default)]
    pub responder: Option<String>,
    /// Inline scripted policy; implies a scripted responder.
    #[serde(default)]
    pub policy: Option<ScriptedPolicy>,
    #[serde(default)]
    pub max_turns: Option<usize>,
    #[serde(default)]
    pub judge: Option<JudgeMode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub id: String,
    pub record_id: String,
    pub status: SessionStatus,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionList {
    pub sessions: Vec<SessionHandle>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessagePosted {
    pub revision: u64,
    pub status: SessionStatus,
}

/// Running proportions over every session the service knows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sessions: usize,
    pub incomplete: usize,
    pub ambiguous: usize,
    pub single_turn_correct: usize,
    pub unresolved: usize,
    pub pi: f64,
    pub pa: f64,
    pub correct_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStateView {
    pub id: String,
    pub record_id: String,
    pub question: String,
    pub status: SessionStatus,
    pub revision: u64,
    /// Set when only messages newer than this revision are included.
    pub since: Option<u64>,
    pub messages: Vec<MessageRecord>,
    pub message_count: usize,
    pub classification: Option<ClassificationRecord>,
    pub correct_at: Option<usize>,
    pub turns_used: usize,
    pub max_turns: usize,
    pub error: Option<String>,
    pub metrics: Metrics,
}

fn handle(s: &LiveSession) -> SessionHandle {
    let snap = s.snapshots.borrow();
    SessionHandle {
        id: s.id.clone(),
        record_id: s.record.id.clone(),
        status: snap.status,
        revision: snap.revision,
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::Validation(e.body_text()))
}

fn build_responder(state: &AppState, req: &CreateSession, record: &DatasetRecord) -> Result<(Box<dyn Agent>, String), ApiError> {
    if let Some(policy) = &req.policy {
        let id = AgentId::scripted(RESPONDER_NAME);
        return Ok((Box::new(ScriptedAgent::new(id, policy.clone())), "scripted:inline".into()));
    }
    let name = req.responder.clone().unwrap_or_else(|| state.config.default_responder.clone());
    let spec: AgentSpec = name.parse().map_err(ApiError::Validation)?;
    let agent: Box<dyn Agent> = match &spec {
        AgentSpec::Llm => {
            let transport: Arc<dyn Transport> = match &state.config.transport {
                Some(t) => t.clone(),
                None => Arc::new(HttpTransport::from_env().map_err(|e| ApiError::Unavailable(e.to_string()))?),
            };
            let id = AgentId::machine(RESPONDER_NAME);
            Box::new(LlmAgent::new(id, &state.config.llm, transport).map_err(|e| ApiError::Unavailable(e.to_string()))?)
        }
        AgentSpec::Oracle => Box::new(OracleAgent::new(
            AgentId::oracle(RESPONDER_NAME),
            OracleTable::from_records([record]),
        )),
        AgentSpec::Scripted(p) => {
            let policy = resolve_policy(p, Some(&state.config.root)).map_err(|e| ApiError::Validation(e.to_string()))?;
            Box::new(ScriptedAgent::new(AgentId::scripted(RESPONDER_NAME), policy))
        }
        AgentSpec::Human => return Err(ApiError::Validation("the responder cannot be the console human".into())),
    };
    Ok((agent, spec.to_string()))
}

pub async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionHandle>), ApiError> {
    let req = body(payload)?;
    let id = state.fresh_id();
    let record = match &req.record {
        Some(row) => DatasetRecord {
            id: row.id.clone(),
            question: row.question.clone(),
            gold_answers: row.answers.clone(),
            passage: row.passage.clone(),
            source: "service".into(),
        },
        None => DatasetRecord {
            id: format!("adhoc-{id}"),
            question: req.question.clone().unwrap_or_default(),
            gold_answers: req.gold.clone(),
            passage: req.passage.clone(),
            source: "service".into(),
        },
    };
    if record.question.trim().is_empty() {
        return Err(ApiError::Validation("question is missing or empty".into()));
    }
    if record.id.trim().is_empty() {
        return Err(ApiError::Validation("record id is empty".into()));
    }
    let max_turns = req.max_turns.unwrap_or(state.config.default_max_turns);
    if max_turns == 0 {
        return Err(ApiError::Validation("max_turns must be at least 1".into()));
    }
    let (responder, responder_spec) = build_responder(&state, &req, &record)?;
    let run = SessionRun::start(
        &record,
        AgentId::human("h"),
        responder.id().clone(),
        JudgeConfig::with_mode(req.judge.unwrap_or_default()),
        max_turns,
        Background::from_statements(req.background.iter().cloned()),
    )
    .map_err(|e| ApiError::Validation(e.to_string()))?;
    let session = launch(Launch {
        id,
        run,
        responder,
        responder_spec,
        store: state.store.clone(),
        shutdown: state.shutdown.clone(),
    })
    .map_err(|e| ApiError::Internal(e.to_string()))?;
    let h = handle(&session);
    tracing::info!(session = %h.id, record = %h.record_id, "session created");
    state.insert(session);
    Ok((StatusCode::CREATED, Json(h)))
}

pub async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<SessionList> {
    Json(SessionList {
        sessions: state.all_sessions().iter().map(|s| handle(s)).collect(),
    })
}

async fn wait_until(
    session: &LiveSession,
    timeout: Duration,
    done: impl FnMut(&Snapshot) -> bool,
) -> Option<Snapshot> {
    let mut rx = session.snapshots.clone();
    let waited = tokio::time::timeout(timeout, async { rx.wait_for(done).await.map(|s| s.clone()) }).await;
    match waited {
        Ok(Ok(s)) => Some(s),
        _ => None,
    }
}

pub async fn post_message(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<HumanDraft>, JsonRejection>,
) -> Result<(StatusCode, Json<MessagePosted>), ApiError> {
    let session = state
        .session(&id)
        .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))?;
    let draft = body(payload)?;
    let _guard = session.post_lock.lock().await;
    let snap = session.snapshot();
    if snap.status.is_final() {
        return Err(ApiError::Conflict(format!("session {id} is {}", status_name(snap.status))));
    }
    if snap.status != SessionStatus::AwaitingHuman {
        return Err(ApiError::Conflict(format!("session {id} is not waiting for human input")));
    }

    if draft.kind == HumanInputKind::Termination {
        session.ended_by_human.store(true, Ordering::SeqCst);
        session.bridge.close();
        let done = wait_until(&session, ACK_TIMEOUT, |s| s.status.is_final())
            .await
            .ok_or_else(|| ApiError::Internal("session did not stop".into()))?;
        return Ok((StatusCode::ACCEPTED, Json(MessagePosted { revision: done.revision, status: done.status })));
    }

    let human = snap.interaction.initiator().clone();
    let context = context_at(
        &snap.interaction,
        &human,
        snap.interaction.turn_count() + 1,
        &Background::from_statements(snap.background.iter().cloned()),
    )
    .map_err(|e| ApiError::Conflict(e.to_string()))?;
    let payload = draft
        .to_payload(&context, snap.interaction.last_message())
        .map_err(|e| ApiError::InvalidMessage(e.to_string()))?;
    let message = Message::new(human, payload, snap.interaction.responder().clone())
        .map_err(|e| ApiError::InvalidMessage(e.to_string()))?;
    snap.interaction
        .appended(message)
        .map_err(|e| ApiError::InvalidMessage(e.to_string()))?;

    session
        .bridge
        .enqueue(draft)
        .map_err(|_| ApiError::Conflict(format!("session {id} is closed")))?;
    let count = snap.interaction.message_count();
    let after = wait_until(&session, ACK_TIMEOUT, |s| {
        s.interaction.message_count() > count || s.status.is_final()
    })
    .await
    .ok_or_else(|| ApiError::Internal("session did not take the message".into()))?;
    Ok((
        StatusCode::ACCEPTED,
        Json(MessagePosted {
            revision: after.revision,
            status: after.status,
        }),
    ))
}

fn status_name(s: SessionStatus) -> &'static str {
    match s {
        SessionStatus::Open => "open",
        SessionStatus::AwaitingHuman => "awaiting-human",
        SessionStatus::Done => "done",
        SessionStatus::Error => "error",
    }
}

#[derive(Debug, Deserialize)]
pub struct StateQuery {
    since: Option<u64>,
    wait_ms: Option<u64>,
}

fn metrics(state: &AppState) -> Metrics {
    let mut m = Metrics {
        sessions: 0,
        incomplete: 0,
        ambiguous: 0,
        single_turn_correct: 0,
        unresolved: 0,
        pi: 0.0,
        pa: 0.0,
        correct_at_1: 0.0,
    };
    for s in state.all_sessions() {
        let snap = s.snapshots.borrow();
        m.sessions += 1;
        match snap.classification.as_ref().map(|c| c.status.as_str()) {
            Some("possibly_incomplete") => m.incomplete += 1,
            Some("possibly_ambiguous") => m.ambiguous += 1,
            Some("answered_single_turn") if snap.correct_at == Some(1) => m.single_turn_correct += 1,
            _ => m.unresolved += 1,
        }
    }
    if m.sessions > 0 {
        let n = m.sessions as f64;
        m.pi = m.incomplete as f64 / n;
        m.pa = m.ambiguous as f64 / n;
        m.correct_at_1 = m.single_turn_correct as f64 / n;
    }
    m
}

pub async fn get_state(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<StateQuery>,
) -> Result<Json<SessionStateView>, ApiError> {
    let session = state
        .session(&id)
        .ok_or_else(|| ApiError::NotFound(format!("no session {id}")))?;
    let mut snap = session.snapshot();
    if let Some(since) = q.since {
        if snap.revision <= since {
            let wait = Duration::from_millis(q.wait_ms.unwrap_or(DEFAULT_WAIT_MS).min(state.config.max_wait_ms));
            if let Some(newer) = wait_until(&session, wait, |s| s.revision > since).await {
                snap = newer;
            }
        }
    }
    Ok(Json(SessionStateView {
        id: session.id.clone(),
        record_id: session.record.id.clone(),
        question: session.record.question.clone(),
        status: snap.status,
        revision: snap.revision,
        since: q.since,
        messages: snap.records_since(q.since),
        message_count: snap.interaction.message_count(),
        classification: snap.classification.clone(),
        correct_at: snap.correct_at,
        turns_used: snap.turns_used,
        max_turns: snap.max_turns,
        error: snap.error.clone(),
        metrics: metrics(&state),
    }))
}

fn valid_run_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name != "sessions"
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

pub async fn get_report(
    State(state): State<Arc<AppState>>,
    Path(run): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    if !valid_run_name(&run) {
        return Err(ApiError::Validation(format!("invalid run name {run:?}")));
    }
    let dir = state.config.root.join(&run);
    let read = |file: &str| -> Result<Option<serde_json::Value>, ApiError> {
        match std::fs::read_to_string(dir.join(file)) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| ApiError::Internal(format!("{file}: {e}"))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ApiError::Internal(e.to_string())),
        }
    };
    let report = read("report.json")?.ok_or_else(|| ApiError::NotFound(format!("no report for run {run}")))?;
    let sweep = read("sweep.json")?;
    Ok(Json(serde_json::json!({ "run": run, "report": report, "sweep": sweep })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_names() {
        assert!(valid_run_name("run-1"));
        assert!(!valid_run_name(".."));
        assert!(!valid_run_name("a/b"));
        assert!(!valid_run_name("sessions"));
    }
}
