//! Websocket endpoint `/session/{id}`. The first connection to an id
//! creates the session; it starts once every human slot is filled.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::mpsc as std_mpsc;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc};

use crate::config::{Mode, SessionConfig};
use crate::error::{Result, ServiceError};
use crate::log::{EventSink, FileSink, LogLine, Tee};
use crate::session::{header_for, run_session, shared};
use crate::source::{Command, LiveSource};

const EVENT_CAPACITY: usize = 4096;

/// Forwards every log line to connected clients.
pub struct BroadcastSink(pub broadcast::Sender<String>);

impl EventSink for BroadcastSink {
    fn emit(&mut self, line: &LogLine) -> Result<()> {
        // No subscribers is not an error: the file log is authoritative.
        let _ = self.0.send(line.to_json());
        Ok(())
    }
}

struct Room {
    commands: Mutex<std_mpsc::Sender<Command>>,
    events: broadcast::Sender<String>,
    slots: Mutex<Vec<bool>>,
    started: Mutex<bool>,
    session_id: String,
    players: usize,
    control_dim: usize,
    dt: f64,
    scenario: String,
}

impl Room {
    fn claim(&self) -> Option<usize> {
        if *self.started.lock().expect("room lock") {
            return None;
        }
        let mut slots = self.slots.lock().expect("room lock");
        let free = slots.iter().position(|s| !s)?;
        slots[free] = true;
        Some(free)
    }

    fn release(&self, player: usize) {
        self.slots.lock().expect("room lock")[player] = false;
    }

    fn connected(&self) -> usize {
        self.slots.lock().expect("room lock").iter().filter(|s| **s).count()
    }

    fn send(&self, command: Command) {
        let _ = self.commands.lock().expect("room lock").send(command);
    }
}

pub struct AppState {
    base: SessionConfig,
    rooms: Mutex<HashMap<String, Arc<Room>>>,
}

impl AppState {
    pub fn new(base: SessionConfig) -> Result<Self> {
        if base.mode == Mode::Synthetic {
            return Err(ServiceError::Config("the server runs live or multi-user sessions".into()));
        }
        base.scenario()?;
        Ok(Self { base, rooms: Mutex::new(HashMap::new()) })
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new().route("/session/{id}", get(upgrade)).with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, base: SessionConfig) -> Result<()> {
    let app = router(Arc::new(AppState::new(base)?));
    axum::serve(listener, app).await?;
    Ok(())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
}

/// First free `<id>.jsonl`, `<id>-2.jsonl`, … in the log directory.
fn unique_session(dir: &std::path::Path, id: &str) -> (String, PathBuf) {
    let mut n = 1;
    loop {
        let candidate = if n == 1 { id.to_string() } else { format!("{id}-{n}") };
        let path = dir.join(format!("{candidate}.jsonl"));
        if !path.exists() {
            return (candidate, path);
        }
        n += 1;
    }
}

fn open_room(state: &Arc<AppState>, id: &str) -> Result<Arc<Room>> {
    let mut rooms = state.rooms.lock().expect("rooms lock");
    if let Some(room) = rooms.get(id) {
        return Ok(room.clone());
    }
    let spec = state.base.scenario()?;
    let humans = state.base.mode.humans(spec.players());
    let (session_id, path) = unique_session(&state.base.log_dir(), id);
    let mut config = state.base.clone();
    config.session_id = Some(session_id.clone());
    let header = header_for(&config, &spec);
    let file = FileSink::create(&path)?;

    let (tx, rx) = std_mpsc::channel();
    let (events, _) = broadcast::channel(EVENT_CAPACITY);
    let room = Arc::new(Room {
        commands: Mutex::new(tx),
        events: events.clone(),
        slots: Mutex::new(vec![false; humans]),
        started: Mutex::new(false),
        session_id,
        players: spec.players(),
        control_dim: spec.setup.control_dim(),
        dt: spec.setup.dt,
        scenario: spec.name.clone(),
    });
    rooms.insert(id.to_string(), room.clone());

    let realtime = config.realtime;
    let control_dim = room.control_dim;
    let state = state.clone();
    let key = id.to_string();
    let runner = room.clone();
    tokio::task::spawn_blocking(move || {
        let sink = shared(Tee(vec![Box::new(file), Box::new(BroadcastSink(events.clone()))]));
        let mut source = LiveSource::new(rx, sink.clone(), humans, control_dim, realtime);
        let result = source
            .wait_for_players(humans)
            .map_err(ServiceError::from)
            .and_then(|_| {
                *runner.started.lock().expect("room lock") = true;
                let _ = events.send(json!({"type": "started", "log": path.display().to_string()}).to_string());
                run_session(&header, &mut source, sink)
            });
        let ended = match &result {
            Ok(outcome) => json!({"type": "ended", "end": outcome.summary.end, "log": path.display().to_string()}),
            Err(e) => {
                tracing::error!(session = %header.session_id, "session failed: {e}");
                json!({"type": "ended", "error": e.to_string(), "log": path.display().to_string()})
            }
        };
        state.rooms.lock().expect("rooms lock").remove(&key);
        let _ = events.send(ended.to_string());
    });
    Ok(room)
}

async fn upgrade(ws: WebSocketUpgrade, Path(id): Path<String>, State(state): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| client(socket, id, state))
}

#[derive(Debug, Deserialize)]
struct ControlFrame {
    #[serde(default)]
    player: Option<usize>,
    t: f64,
    u0: Vec<f64>,
}

fn error_frame(message: impl std::fmt::Display) -> String {
    json!({"type": "error", "message": message.to_string()}).to_string()
}

fn warning_frame(message: impl std::fmt::Display) -> String {
    json!({"type": "warning", "message": message.to_string()}).to_string()
}

async fn client(socket: WebSocket, id: String, state: Arc<AppState>) {
    let (mut out, mut incoming) = socket.split();
    if !valid_id(&id) {
        let _ = out.send(Message::Text(error_frame(format!("invalid session id `{id}`")).into())).await;
        let _ = out.close().await;
        return;
    }
    let room = match open_room(&state, &id) {
        Ok(room) => room,
        Err(e) => {
            let _ = out.send(Message::Text(error_frame(e).into())).await;
            let _ = out.close().await;
            return;
        }
    };
    let mut events = room.events.subscribe();
    let Some(player) = room.claim() else {
        let _ = out.send(Message::Text(error_frame("session is full or already running").into())).await;
        let _ = out.close().await;
        return;
    };

    let welcome = json!({
        "type": "welcome",
        "session_id": room.session_id,
        "player": player,
        "players": room.players,
        "control_dim": room.control_dim,
        "dt": room.dt,
        "scenario": room.scenario,
    });
    if out.send(Message::Text(welcome.to_string().into())).await.is_err() {
        room.release(player);
        return;
    }

    let (direct, mut direct_rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        loop {
            let frame = tokio::select! {
                biased;
                Some(f) = direct_rx.recv() => f,
                event = events.recv() => match event {
                    Ok(f) => f,
                    Err(broadcast::error::RecvError::Lagged(n)) => warning_frame(format!("dropped {n} events")),
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            let last = frame.contains("\"type\":\"ended\"");
            if out.send(Message::Text(frame.into())).await.is_err() || last {
                break;
            }
        }
        let _ = out.close().await;
    });

    let needed = room.slots.lock().expect("room lock").len();
    let _ = room.events.send(json!({"type": "waiting", "connected": room.connected(), "needed": needed}).to_string());
    room.send(Command::Join { player });

    while let Some(Ok(message)) = incoming.next().await {
        let text = match message {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        if let Some(reply) = handle_frame(&room, player, &text) {
            let _ = direct.send(reply);
        }
    }
    room.release(player);
    room.send(Command::Leave { player });
    writer.abort();
}

/// Forwards a client frame; returns a reply for the sender when needed.
fn handle_frame(room: &Room, player: usize, text: &str) -> Option<String> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return Some(error_frame(format!("malformed frame: {e}"))),
    };
    match value.get("type").and_then(Value::as_str) {
        Some("control") => {
            let frame: ControlFrame = match serde_json::from_value(value) {
                Ok(f) => f,
                Err(e) => return Some(error_frame(format!("bad control frame: {e}"))),
            };
            if frame.player.is_some_and(|p| p != player) {
                return Some(error_frame(format!("this connection controls player {player}")));
            }
            if frame.u0.len() != room.control_dim {
                return Some(error_frame(format!("control has {} components, expected {}", frame.u0.len(), room.control_dim)));
            }
            if !frame.t.is_finite() || frame.u0.iter().any(|x| !x.is_finite()) {
                return Some(error_frame("control values must be finite"));
            }
            room.send(Command::Control { player, t: frame.t, u0: frame.u0 });
            None
        }
        Some("ping") => Some(json!({"type": "pong"}).to_string()),
        Some(other) => Some(warning_frame(format!("unknown frame type `{other}`"))),
        None => Some(error_frame("frame has no `type`")),
    }
}
