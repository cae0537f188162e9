use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use ifgame_core::scenarios::builtin;
use ifgame_service::config::{Mode, ScenarioRef, SessionConfig};
use ifgame_service::log::{LogLine, ParsedLog, SessionEnd};
use ifgame_service::replay::replay;
use serde_json::{json, Value};
use tempfile::TempDir;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(scenario: &str, mode: Mode, dir: &TempDir) -> SocketAddr {
    let mut config = SessionConfig::new(ScenarioRef::Named(scenario.into()));
    config.mode = mode;
    config.log_dir = Some(dir.path().to_path_buf());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(ifgame_service::server::serve(listener, config));
    addr
}

async fn connect(addr: SocketAddr, id: &str) -> Client {
    connect_async(format!("ws://{addr}/session/{id}")).await.unwrap().0
}

async fn send(client: &mut Client, frame: Value) {
    client.send(Message::text(frame.to_string())).await.unwrap();
}

/// Reads frames until one of type `kind` arrives; returns it and everything seen.
async fn until(client: &mut Client, kind: &str) -> (Value, Vec<Value>) {
    let mut seen = Vec::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(20);
    loop {
        let msg = tokio::time::timeout_at(deadline, client.next())
            .await
            .unwrap_or_else(|_| panic!("no `{kind}` frame"))
            .unwrap_or_else(|| panic!("socket closed before `{kind}`"))
            .unwrap();
        let Message::Text(text) = msg else { continue };
        let value: Value = serde_json::from_str(text.as_str()).unwrap();
        if value["type"] == kind {
            return (value, seen);
        }
        seen.push(value);
    }
}

async fn finished_log(dir: &Path, id: &str) -> ParsedLog {
    let path = dir.join(format!("{id}.jsonl"));
    for _ in 0..400 {
        if let Ok(log) = ParsedLog::read(&path) {
            if log.has_summary {
                return log;
            }
        }
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    let tail = std::fs::read_to_string(&path).unwrap_or_default();
    let n = tail.len();
    panic!("log {} never completed: {}", path.display(), &tail[n.saturating_sub(600)..]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn two_observers_see_the_figure_at_the_same_tick() {
    let dir = TempDir::new().unwrap();
    let addr = start("iavr-figure", Mode::MultiUser, &dir).await;
    let spec = builtin("iavr-figure", 0).unwrap();
    let figure = spec.figure.clone().unwrap();
    let target = figure.center(&figure.targets[0]);

    let mut a = connect(addr, "room").await;
    let (welcome_a, _) = until(&mut a, "welcome").await;
    assert_eq!(welcome_a["player"], 0);
    send(&mut a, json!({"type": "control", "t": 0.0, "u0": target})).await;
    tokio::time::sleep(Duration::from_millis(200)).await;
    let mut b = connect(addr, "room").await;
    let (welcome_b, _) = until(&mut b, "welcome").await;
    assert_eq!(welcome_b["player"], 1);
    send(&mut b, json!({"type": "control", "player": 1, "t": 0.0, "u0": target})).await;

    let (seen_a, _) = until(&mut a, "figure-visible").await;
    let (seen_b, _) = until(&mut b, "figure-visible").await;
    assert_eq!(seen_a["tick"], seen_b["tick"]);

    let log = finished_log(dir.path(), "room").await;
    let first = log
        .ticks()
        .find(|t| {
            t.epsilon_hat.as_ref().is_some_and(|e| {
                e.chunks(2).all(|p| figure.cells.cell_of(p).0 == figure.targets[0])
            })
        })
        .unwrap()
        .tick;
    // Dwell of 0.5 s at 100 Hz: fifty consecutive co-located ticks.
    assert_eq!(figure.required_ticks(), 50);
    assert_eq!(seen_a["tick"].as_u64().unwrap() as usize, first + 50 - 1);
    assert_eq!(log.summary().unwrap().figure_visible_tick, Some(first + 49));
    let result = replay(&log, None, None).unwrap();
    assert!(result.identical, "mismatch at {:?}", result.mismatch_tick);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn bad_frames_get_error_and_warning_replies() {
    let dir = TempDir::new().unwrap();
    let addr = start("pursuit1d", Mode::Live, &dir).await;
    let mut c = connect(addr, "frames").await;
    until(&mut c, "welcome").await;
    until(&mut c, "started").await;

    c.send(Message::text("{not json")).await.unwrap();
    let (e, _) = until(&mut c, "error").await;
    assert!(e["message"].as_str().unwrap().contains("malformed"));
    send(&mut c, json!({"type": "dance"})).await;
    let (w, _) = until(&mut c, "warning").await;
    assert!(w["message"].as_str().unwrap().contains("dance"));
    send(&mut c, json!({"type": "control", "t": 0.1, "u0": [1.0, 2.0]})).await;
    let (e, _) = until(&mut c, "error").await;
    assert!(e["message"].as_str().unwrap().contains("components"));
    send(&mut c, json!({"type": "control", "player": 4, "t": 0.1, "u0": [1.0]})).await;
    let (e, _) = until(&mut c, "error").await;
    assert!(e["message"].as_str().unwrap().contains("player 0"));

    let mut second = connect(addr, "frames").await;
    let (full, _) = until(&mut second, "error").await;
    assert!(full["message"].as_str().unwrap().contains("full"));

    c.close(None).await.unwrap();
    let log = finished_log(dir.path(), "frames").await;
    assert_eq!(log.controls().count(), 0);
    assert_eq!(log.summary().unwrap().end, SessionEnd::Aborted);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn late_control_is_flagged_and_solo_log_replays() {
    let dir = TempDir::new().unwrap();
    let addr = start("pursuit1d", Mode::Live, &dir).await;
    let mut c = connect(addr, "solo").await;
    until(&mut c, "welcome").await;
    until(&mut c, "started").await;
    tokio::time::sleep(Duration::from_millis(300)).await;
    send(&mut c, json!({"type": "control", "t": 0.0, "u0": [0.4]})).await;
    let (control, _) = until(&mut c, "control").await;
    assert_eq!(control["late"], true);
    assert!(control["tick_applied"].as_u64().unwrap() >= 20);
    let (tick, _) = until(&mut c, "tick").await;
    let ahead = tick["t"].as_f64().unwrap() + 1.0;
    send(&mut c, json!({"type": "control", "t": ahead, "u0": [0.6]})).await;
    let (control, _) = until(&mut c, "control").await;
    assert_eq!(control["late"], false);
    c.close(None).await.unwrap();

    let log = finished_log(dir.path(), "solo").await;
    assert_eq!(log.controls().count(), 2);
    assert_eq!(log.disconnects().count(), 1);
    assert!(log.lines.iter().any(|l| matches!(l, LogLine::SetBoundary(_))));
    let result = replay(&log, None, None).unwrap();
    assert!(result.identical, "mismatch at {:?}", result.mismatch_tick);
    assert_eq!(result.summary_match, Some(true));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn reused_session_id_gets_a_fresh_log() {
    let dir = TempDir::new().unwrap();
    let addr = start("pursuit1d", Mode::Live, &dir).await;
    for expected in ["again", "again-2"] {
        // A finishing session still holds the id briefly; retry until admitted.
        let (mut c, welcome) = loop {
            let mut c = connect(addr, "again").await;
            let Some(Ok(Message::Text(first))) = c.next().await else { panic!("no first frame") };
            let first: Value = serde_json::from_str(first.as_str()).unwrap();
            if first["type"] == "welcome" {
                break (c, first);
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        };
        assert_eq!(welcome["session_id"], expected);
        until(&mut c, "started").await;
        c.close(None).await.unwrap();
        finished_log(dir.path(), expected).await;
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn invalid_session_id_is_rejected() {
    let dir = TempDir::new().unwrap();
    let addr = start("pursuit1d", Mode::Live, &dir).await;
    let mut c = connect(addr, "bad%20id").await;
    let (e, _) = until(&mut c, "error").await;
    assert!(e["message"].as_str().unwrap().contains("invalid session id"));
}
