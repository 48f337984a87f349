//! Websocket transport. Each session is owned by one task that receives
//! commands over a channel; searches run on the blocking pool so the
//! runtime keeps serving other sessions while an agent thinks.

use crate::checkpoints::CheckpointStore;
use crate::hub::error_frame;
use crate::protocol::{ClientMessage, Frame};
use crate::session::Session;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use tokio::net::TcpListener;
use tokio::sync::mpsc;

/// Sessions with no client traffic for this long are dropped.
pub const IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

type Outbox = mpsc::UnboundedSender<Frame>;

enum Command {
    Action(i64),
    Attach { from_seq: u64, out: Outbox },
}

#[derive(Clone)]
struct AppState {
    store: Arc<CheckpointStore>,
    sessions: Arc<Mutex<HashMap<String, mpsc::Sender<Command>>>>,
    created: Arc<AtomicU64>,
}

pub fn router(store: Arc<CheckpointStore>) -> Router {
    let state = AppState { store, sessions: Arc::default(), created: Arc::default() };
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/health", get(|| async { "ok" }))
        .route("/checkpoints", get(list_checkpoints))
        .with_state(state)
}

/// Binds `addr` and serves in the background; returns the bound address.
pub async fn spawn(addr: SocketAddr, store: Arc<CheckpointStore>) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(store);
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("server stopped: {e}");
        }
    });
    Ok((local, handle))
}

pub async fn serve(addr: SocketAddr, store: Arc<CheckpointStore>) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}

async fn list_checkpoints(State(app): State<AppState>) -> Json<Vec<String>> {
    Json(app.store.list())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, app))
}

async fn connection(socket: WebSocket, app: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (out, mut outbox) = mpsc::unbounded_channel::<Frame>();
    let writer = tokio::spawn(async move {
        while let Some(f) = outbox.recv().await {
            if sink.send(Message::Text(f.to_json().into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match ClientMessage::parse(&text) {
            Ok(m) => dispatch(&app, m, &out).await,
            Err(e) => Some(error_frame(None, e)),
        };
        if let Some(f) = reply {
            let _ = out.send(f);
        }
    }
    drop(out);
    let _ = writer.await;
}

async fn dispatch(app: &AppState, msg: ClientMessage, out: &Outbox) -> Option<Frame> {
    match msg {
        ClientMessage::Create(req) => {
            let id = format!("s{}", app.created.fetch_add(1, Ordering::Relaxed) + 1);
            let store = app.store.clone();
            let (rid, rreq) = (id.clone(), req.clone());
            // Loading a checkpoint touches the filesystem.
            let opened = tokio::task::spawn_blocking(move || Session::open(&rid, &rreq, &store)).await.ok()?;
            let session = match opened {
                Ok(s) => s,
                Err(e) => return Some(error_frame(None, e.to_string())),
            };
            let (tx, rx) = mpsc::channel(64);
            app.sessions.lock().unwrap().insert(id.clone(), tx);
            tokio::spawn(run_session(session, rx, out.clone(), app.sessions.clone()));
            None
        }
        ClientMessage::Action { session, action } => {
            forward(app, &session, Command::Action(action)).await.err().map(|m| error_frame(Some(&session), m))
        }
        ClientMessage::Resume { session, from_seq } => {
            let cmd = Command::Attach { from_seq, out: out.clone() };
            forward(app, &session, cmd).await.err().map(|m| error_frame(Some(&session), m))
        }
    }
}

async fn forward(app: &AppState, session: &str, cmd: Command) -> Result<(), &'static str> {
    let tx = app.sessions.lock().unwrap().get(session).cloned();
    match tx {
        Some(tx) => tx.send(cmd).await.map_err(|_| "session closed"),
        None => Err("unknown or expired session"),
    }
}

fn send_all(out: &Outbox, frames: Vec<Frame>) {
    for f in frames {
        let _ = out.send(f);
    }
}

async fn resolve_agents(s: &mut Session, out: &Outbox) {
    while s.agent_to_move() {
        let (thinking, turn) = s.begin_agent_turn();
        let _ = out.send(thinking);
        let mv = tokio::task::spawn_blocking(move || turn.run()).await.expect("search task");
        send_all(out, s.finish_agent_turn(mv));
    }
    send_all(out, s.settle());
}

async fn run_session(
    mut s: Session,
    mut rx: mpsc::Receiver<Command>,
    mut out: Outbox,
    registry: Arc<Mutex<HashMap<String, mpsc::Sender<Command>>>>,
) {
    resolve_agents(&mut s, &out).await;
    while let Ok(Some(cmd)) = tokio::time::timeout(IDLE_TIMEOUT, rx.recv()).await {
        match cmd {
            Command::Action(a) => {
                let (frames, applied) = s.apply_human(a);
                send_all(&out, frames);
                if applied {
                    resolve_agents(&mut s, &out).await;
                }
            }
            Command::Attach { from_seq, out: new } => {
                out = new;
                send_all(&out, s.frames_from(from_seq));
            }
        }
    }
    registry.lock().unwrap().remove(s.id());
}
