//! Live steering sessions over websockets.
//!
//! `GET /ws` upgrades to a websocket bound to a session (`?session=ID`
//! reattaches, otherwise a new one starts from the default scenario).
//! `GET /status` lists sessions and their parameters and
//! `GET /sessions/{id}/scenario` exports a session's transcript.

pub mod protocol;
pub mod session;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use amoeba_core::scenario::ScenarioSpec;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use protocol::{parse_command, ServerMessage};
use session::{Session, SessionOptions, SessionStatus};

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub default_scenario: ScenarioSpec,
    pub session: SessionOptions,
    /// How long a session outlives its last client.
    pub grace: Duration,
}

impl ServerConfig {
    pub fn new(default_scenario: ScenarioSpec) -> Self {
        Self {
            default_scenario,
            session: SessionOptions::default(),
            grace: Duration::from_secs(60),
        }
    }
}

struct Inner {
    config: ServerConfig,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    next_id: AtomicU64,
}

/// Shared server state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState(Arc::new(Inner {
            config,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }))
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.0.sessions.lock().unwrap().get(id).cloned()
    }

    pub fn sessions(&self) -> Vec<Arc<Session>> {
        let mut v: Vec<_> = self.0.sessions.lock().unwrap().values().cloned().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    fn create_session(&self) -> Result<Arc<Session>, String> {
        let id = format!("s{}", self.0.next_id.fetch_add(1, Ordering::SeqCst));
        let s = Session::start(
            id.clone(),
            self.0.config.default_scenario.clone(),
            self.0.config.session.clone(),
        )
        .map_err(|e| e.to_string())?;
        self.0.sessions.lock().unwrap().insert(id, s.clone());
        Ok(s)
    }

    /// Drops the session if nobody has reattached within the grace period.
    fn schedule_expiry(&self, session: Arc<Session>) {
        let state = self.clone();
        let grace = self.0.config.grace;
        tokio::spawn(async move {
            tokio::time::sleep(grace).await;
            let expired = {
                let mut map = state.0.sessions.lock().unwrap();
                if session.clients() == 0 && map.contains_key(&session.id) {
                    map.remove(&session.id)
                } else {
                    None
                }
            };
            if let Some(s) = expired {
                log::info!("session {} expired", s.id);
                tokio::task::spawn_blocking(move || s.shutdown());
            }
        });
    }

    /// Stops every session worker.
    pub fn shutdown(&self) {
        let all: Vec<_> = self
            .0
            .sessions
            .lock()
            .unwrap()
            .drain()
            .map(|(_, s)| s)
            .collect();
        for s in all {
            s.shutdown();
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/ws", get(ws_handler))
        .route("/status", get(status_handler))
        .route("/sessions/{id}/scenario", get(export_handler))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds and serves in the background, returning the bound address.
pub async fn spawn(
    bind: SocketAddr,
    config: ServerConfig,
) -> std::io::Result<(
    SocketAddr,
    AppState,
    tokio::task::JoinHandle<std::io::Result<()>>,
)> {
    let listener = TcpListener::bind(bind).await?;
    let addr = listener.local_addr()?;
    let state = AppState::new(config);
    let handle = tokio::spawn(serve(listener, state.clone()));
    Ok((addr, state, handle))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusReport {
    pub sessions: Vec<SessionStatus>,
    pub default_scenario: String,
    pub grace_seconds: f64,
}

async fn status_handler(State(state): State<AppState>) -> Json<StatusReport> {
    Json(StatusReport {
        sessions: state.sessions().iter().map(|s| s.status()).collect(),
        default_scenario: state.0.config.default_scenario.name.clone(),
        grace_seconds: state.0.config.grace.as_secs_f64(),
    })
}

async fn export_handler(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    let Some(session) = state.session(&id) else {
        return (StatusCode::NOT_FOUND, format!("no session {id:?}")).into_response();
    };
    let (tx, mut rx) = mpsc::unbounded_channel();
    session.send(protocol::SessionCommand::Export, tx);
    match rx.recv().await {
        Some(ServerMessage::Exported { scenario, .. }) => scenario.into_response(),
        Some(ServerMessage::Error { message }) => {
            (StatusCode::SERVICE_UNAVAILABLE, message).into_response()
        }
        _ => (StatusCode::SERVICE_UNAVAILABLE, "session ended").into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct WsQuery {
    session: Option<String>,
}

async fn ws_handler(
    State(state): State<AppState>,
    Query(q): Query<WsQuery>,
    ws: WebSocketUpgrade,
) -> Response {
    let session = match q.session {
        Some(id) => match state.session(&id) {
            Some(s) => s,
            None => return (StatusCode::NOT_FOUND, format!("no session {id:?}")).into_response(),
        },
        None => match state.create_session() {
            Ok(s) => s,
            Err(e) => return (StatusCode::INTERNAL_SERVER_ERROR, e).into_response(),
        },
    };
    session.attach();
    ws.on_upgrade(move |socket| client_loop(socket, state, session))
}

async fn client_loop(mut socket: WebSocket, state: AppState, session: Arc<Session>) {
    let status = session.status();
    let hello = ServerMessage::Hello {
        session_id: session.id.clone(),
        scenario: status.scenario,
        width: status.width,
        height: status.height,
        population: status.population,
    };
    let (reply_tx, mut replies) = mpsc::unbounded_channel::<ServerMessage>();
    let mut frames = session.frames();
    let mut ok = socket.send(Message::text(hello.to_json())).await.is_ok();
    // mark the current frame seen and send it, so a new client has a picture
    let current = frames.borrow_and_update().clone();
    if let (true, Some(f)) = (ok, current) {
        ok = socket.send(Message::text(f.json.clone())).await.is_ok();
    }

    while ok {
        // replies first, so an Ack always precedes the frames its command caused;
        // input before frames, so a fast session cannot starve the client
        tokio::select! {
            biased;
            Some(reply) = replies.recv() => {
                ok = socket.send(Message::text(reply.to_json())).await.is_ok();
            }
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => match parse_command(&text) {
                    Ok(cmd) => session.send(cmd, reply_tx.clone()),
                    Err(e) => {
                        ok = socket.send(Message::text(ServerMessage::error(e).to_json())).await.is_ok();
                    }
                },
                Some(Ok(Message::Binary(_))) => {
                    let e = ServerMessage::error("malformed message: expected a JSON text message");
                    ok = socket.send(Message::text(e.to_json())).await.is_ok();
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            changed = frames.changed() => {
                if changed.is_err() {
                    break;
                }
                // only the newest frame is sent; older ones were superseded
                let latest = frames.borrow_and_update().clone();
                if let Some(f) = latest {
                    ok = socket.send(Message::text(f.json.clone())).await.is_ok();
                }
            }
        }
    }

    if session.detach() == 0 {
        state.schedule_expiry(session);
    }
}
