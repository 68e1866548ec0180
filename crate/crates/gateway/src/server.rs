//! WebSocket endpoint `/session` and health endpoint `/healthz`.

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::time::MissedTickBehavior;

use crate::protocol::{ClientMessage, Envelope, ErrorCode, ServerMessage};
use crate::session::{Session, SessionConfig};

pub const DEFAULT_PORT: u16 = 8765;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub bind: SocketAddr,
    pub session: SessionConfig,
    /// Where finished trials are written as `<session_id>.json`.
    pub results_dir: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { bind: SocketAddr::from(([127, 0, 0, 1], DEFAULT_PORT)), session: SessionConfig::default(), results_dir: None }
    }
}

impl GatewayConfig {
    pub fn load(path: &FsPath) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        cfg.session.validate().map_err(GatewayError::Config)?;
        Ok(cfg)
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(#[from] std::io::Error),
}

struct Shared {
    cfg: GatewayConfig,
    active: AtomicUsize,
    next_id: AtomicU64,
    shutdown: watch::Receiver<bool>,
}

/// A bound, not yet serving gateway.
pub struct Gateway {
    listener: TcpListener,
    shared: Arc<Shared>,
    shutdown_tx: watch::Sender<bool>,
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
    active_sessions: usize,
    tick_hz: f64,
}

impl Gateway {
    pub async fn bind(cfg: GatewayConfig) -> Result<Self, GatewayError> {
        cfg.session.validate().map_err(GatewayError::Config)?;
        let listener = TcpListener::bind(cfg.bind).await.map_err(|source| GatewayError::Bind { addr: cfg.bind, source })?;
        let (shutdown_tx, shutdown) = watch::channel(false);
        let shared = Arc::new(Shared { cfg, active: AtomicUsize::new(0), next_id: AtomicU64::new(1), shutdown });
        Ok(Self { listener, shared, shutdown_tx })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Live session count, readable while serving.
    pub fn session_counter(&self) -> SessionCounter {
        SessionCounter(self.shared.clone())
    }

    /// Serve until `signal` resolves, then close every session and return.
    pub async fn run_until(self, signal: impl Future<Output = ()> + Send + 'static) -> Result<(), GatewayError> {
        let app = Router::new()
            .route("/healthz", get(health))
            .route("/session", get(upgrade))
            .with_state(self.shared.clone());
        let tx = self.shutdown_tx;
        axum::serve(self.listener, app)
            .with_graceful_shutdown(async move {
                signal.await;
                let _ = tx.send(true);
            })
            .await?;
        Ok(())
    }
}

#[derive(Clone)]
pub struct SessionCounter(Arc<Shared>);

impl SessionCounter {
    pub fn get(&self) -> usize {
        self.0.active.load(Ordering::SeqCst)
    }
}

async fn health(State(shared): State<Arc<Shared>>) -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
        active_sessions: shared.active.load(Ordering::SeqCst),
        tick_hz: shared.cfg.session.tick_hz,
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, shared))
}

struct ActiveGuard(Arc<Shared>);

impl Drop for ActiveGuard {
    fn drop(&mut self) {
        self.0.active.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn send_all(socket: &mut WebSocket, session: &Session, msgs: Vec<ServerMessage>) -> bool {
    for message in msgs {
        let env = Envelope { session_id: session.id().to_string(), tick: session.tick_count(), message };
        let text = serde_json::to_string(&env).expect("server messages serialize");
        if socket.send(Message::Text(text.into())).await.is_err() {
            return false;
        }
    }
    true
}

fn write_record(dir: &FsPath, session: &Session) {
    if let Some(rec) = session.record() {
        let path = dir.join(format!("{}.json", rec.session_id));
        let text = serde_json::to_string_pretty(rec).expect("records serialize");
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, text)) {
            eprintln!("cannot write {}: {e}", path.display());
        }
    }
}

/// One tick loop per connection; the session is dropped when the client
/// goes away or the server shuts down.
async fn run_session(mut socket: WebSocket, shared: Arc<Shared>) {
    shared.active.fetch_add(1, Ordering::SeqCst);
    let _guard = ActiveGuard(shared.clone());
    let id = format!("session-{}", shared.next_id.fetch_add(1, Ordering::SeqCst));
    let mut session = Session::new(id, shared.cfg.session.clone());
    let mut shutdown = shared.shutdown.clone();
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / shared.cfg.session.tick_hz));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);

    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let replies = match incoming {
                    Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMessage>(&text) {
                        Ok(msg) => session.handle(msg),
                        Err(e) => vec![ServerMessage::error(ErrorCode::BadMessage, e.to_string())],
                    },
                    Some(Ok(Message::Binary(_))) => vec![ServerMessage::error(ErrorCode::BadMessage, "expected a text message")],
                    Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                    Some(Ok(_)) => Vec::new(),
                };
                if !send_all(&mut socket, &session, replies).await {
                    break;
                }
            }
            _ = ticker.tick() => {
                let was_running = session.is_running();
                let msgs = session.tick();
                if !send_all(&mut socket, &session, msgs).await {
                    break;
                }
                if was_running && !session.is_running() {
                    if let Some(dir) = &shared.cfg.results_dir {
                        write_record(dir, &session);
                    }
                }
            }
            _ = shutdown.changed() => {
                let _ = socket.send(Message::Close(None)).await;
                break;
            }
        }
    }
}
