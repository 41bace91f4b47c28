//! HTTP/JSON API for live sessions plus a per-session server-sent event
//! stream. Each session's mutations go through one mutex, which also owns the
//! append-only log file, so the log order is the order commands took effect.

mod api;
mod push;

use std::collections::HashMap;
use std::fs::File;
use std::future::Future;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use axum::routing::{get, post};
use axum::Router;
use calib_core::session::{EventLogWriter, RevealOutcome};
use calib_core::{QuestionBank, Session};
use tokio::net::TcpListener;
use tokio::sync::broadcast;

pub use api::{CreatedView, QuestionView, ResultsView, StateView};
pub use push::PushEvent;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bank: QuestionBank,
    pub asked: usize,
    pub scored: usize,
    /// Seed for every session's scoring subset; random per session if unset.
    pub seed: Option<u64>,
    pub pause_seconds: u32,
    pub data_dir: PathBuf,
}

pub(crate) struct LiveState {
    session: Session,
    log: EventLogWriter<BufWriter<File>>,
    logged: usize,
    outcome: Option<Arc<RevealOutcome>>,
}

impl LiveState {
    /// Appends events recorded since the last call to the log.
    fn persist(&mut self) -> calib_core::Result<()> {
        for event in &self.session.event_log()[self.logged..] {
            self.log.append(event)?;
        }
        self.logged = self.session.event_log().len();
        Ok(())
    }
}

pub(crate) struct LiveSession {
    state: Mutex<LiveState>,
    push: broadcast::Sender<PushEvent>,
}

impl LiveSession {
    fn lock(&self) -> MutexGuard<'_, LiveState> {
        self.state.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    fn publish(&self, event: PushEvent) {
        // no subscribers is fine
        let _ = self.push.send(event);
    }
}

pub(crate) struct Inner {
    config: ServerConfig,
    sessions: RwLock<HashMap<String, Arc<LiveSession>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServerConfig) -> std::io::Result<Self> {
        std::fs::create_dir_all(&config.data_dir)?;
        Ok(Self(Arc::new(Inner { config, sessions: RwLock::new(HashMap::new()) })))
    }

    pub fn config(&self) -> &ServerConfig {
        &self.0.config
    }

    fn get(&self, id: &str) -> Option<Arc<LiveSession>> {
        self.0.sessions.read().unwrap_or_else(|p| p.into_inner()).get(id).cloned()
    }

    fn insert(&self, id: String, live: LiveSession) {
        self.0.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(id, Arc::new(live));
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(api::create))
        .route("/sessions/{id}/join", post(api::join))
        .route("/sessions/{id}/advance", post(api::advance))
        .route("/sessions/{id}/answers", post(api::answer))
        .route("/sessions/{id}/state", get(api::state))
        .route("/sessions/{id}/results", get(api::results))
        .route("/sessions/{id}/events", get(push::events))
        .with_state(state)
}

pub async fn run(state: AppState, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
