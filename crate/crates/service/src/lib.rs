//! HTTP facade over live sessions between a human at a console and a
//! responder agent.
//!
//! Endpoints:
//!
//! - `POST /sessions` creates a session and sends the opening question.
//! - `POST /sessions/{id}/messages` posts the human's next message.
//! - `GET /sessions/{id}?since=r&wait_ms=t` returns the state, or only what
//!   changed after revision `r`, long-polling up to `t` ms.
//! - `GET /sessions` lists sessions.
//! - `GET /reports/{run}` returns a batch run's report.
//!
//! Errors are returned as `{"code": ..., "message": ...}`.

mod api;
mod error;
mod live;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::routing::{get, post};
use axum::Router;
use dialoggate::agents::{AgentConfig, ResponderKind, Transport};

pub use api::{
    CreateSession, MessagePosted, Metrics, SessionHandle, SessionList, SessionStateView,
};
pub use error::{ApiError, ErrorBody};
pub use live::{LiveSession, SessionMeta, Snapshot};

#[derive(Clone)]
pub struct ServiceConfig {
    /// Holds `sessions/` and batch run directories.
    pub root: PathBuf,
    /// Responder used when a create request names none.
    pub default_responder: String,
    pub llm: AgentConfig,
    pub transport: Option<Arc<dyn Transport>>,
    pub default_max_turns: usize,
    /// Upper bound for `wait_ms`.
    pub max_wait_ms: u64,
}

impl ServiceConfig {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            default_responder: "llm".to_string(),
            llm: AgentConfig::new(ResponderKind::Llm),
            transport: None,
            default_max_turns: 6,
            max_wait_ms: 60_000,
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    store: Arc<live::Store>,
    sessions: RwLock<BTreeMap<String, Arc<LiveSession>>>,
    next_id: AtomicU64,
    shutdown: Arc<AtomicBool>,
}

impl AppState {
    /// Opens the store under `config.root` and reloads stored sessions.
    pub fn open(config: ServiceConfig) -> std::io::Result<Arc<Self>> {
        let store = Arc::new(live::Store::new(&config.root)?);
        let mut sessions = BTreeMap::new();
        let mut max_seen = 0;
        for (meta, snapshot) in store.load_all() {
            if let Some(n) = meta.id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max_seen = max_seen.max(n);
            }
            let (_tx, rx) = tokio::sync::watch::channel(snapshot);
            let bridge = dialoggate::agents::HumanBridge::new();
            bridge.close();
            sessions.insert(
                meta.id.clone(),
                Arc::new(LiveSession {
                    id: meta.id.clone(),
                    record: meta.record,
                    bridge,
                    ended_by_human: Arc::new(AtomicBool::new(false)),
                    snapshots: rx,
                    post_lock: tokio::sync::Mutex::new(()),
                }),
            );
        }
        tracing::info!(sessions = sessions.len(), root = %config.root.display(), "session store opened");
        Ok(Arc::new(Self {
            config,
            store,
            sessions: RwLock::new(sessions),
            next_id: AtomicU64::new(max_seen + 1),
            shutdown: Arc::new(AtomicBool::new(false)),
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn session(&self, id: &str) -> Option<Arc<LiveSession>> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).get(id).cloned()
    }

    fn all_sessions(&self) -> Vec<Arc<LiveSession>> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner()).values().cloned().collect()
    }

    fn insert(&self, session: Arc<LiveSession>) {
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(session.id.clone(), session);
    }

    fn fresh_id(&self) -> String {
        format!("s{:06}", self.next_id.fetch_add(1, Ordering::SeqCst))
    }

    /// Stops waiting drivers; their sessions end in `error`.
    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::SeqCst);
        for s in self.all_sessions() {
            s.bridge.close();
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(api::create_session).get(api::list_sessions))
        .route("/sessions/{id}", get(api::get_state))
        .route("/sessions/{id}/messages", post(api::post_message))
        .route("/reports/{run}", get(api::get_report))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::open(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    let app = router(state.clone());
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    state.shutdown();
    result
}
