//! Live gateway over a real socket.

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use hapticnav_core::navigator::{normalize_deg, Path, Pose};
use hapticnav_gateway::server::SessionCounter;
use hapticnav_gateway::{Envelope, ErrorCode, Gateway, GatewayConfig, GatewayError, ServerMessage, SessionConfig};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

struct Running {
    addr: SocketAddr,
    counter: SessionCounter,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<Result<(), GatewayError>>,
}

async fn launch(cfg: GatewayConfig) -> Running {
    let gw = Gateway::bind(GatewayConfig { bind: "127.0.0.1:0".parse().unwrap(), ..cfg }).await.unwrap();
    let (addr, counter) = (gw.local_addr(), gw.session_counter());
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(gw.run_until(async move {
        let _ = rx.await;
    }));
    Running { addr, counter, stop: Some(tx), task }
}

async fn connect(addr: SocketAddr) -> Ws {
    connect_async(format!("ws://{addr}/session")).await.unwrap().0
}

async fn send(ws: &mut Ws, json: serde_json::Value) {
    ws.send(Message::Text(json.to_string().into())).await.unwrap();
}

async fn next(ws: &mut Ws) -> Envelope {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("message in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn http_get(addr: SocketAddr, path: &str) -> String {
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: test\r\nConnection: close\r\n\r\n").as_bytes()).await.unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).await.unwrap();
    out
}

async fn wait_for_sessions(counter: &SessionCounter, n: usize) {
    for _ in 0..200 {
        if counter.get() == n {
            return;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("expected {n} sessions, have {}", counter.get());
}

#[tokio::test]
async fn health_endpoint_reports_status() {
    let gw = launch(GatewayConfig::default()).await;
    let resp = http_get(gw.addr, "/healthz").await;
    assert!(resp.starts_with("HTTP/1.1 200"));
    let body: serde_json::Value = serde_json::from_str(resp.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["status"], "ok");
    assert_eq!(body["active_sessions"], 0);
}

#[tokio::test]
async fn steer_before_start_and_garbage_are_errors() {
    let gw = launch(GatewayConfig::default()).await;
    let mut ws = connect(gw.addr).await;
    send(&mut ws, serde_json::json!({"type": "Steer", "action": "forward"})).await;
    assert!(matches!(next(&mut ws).await.message, ServerMessage::Error { code: ErrorCode::NotStarted, .. }));
    ws.send(Message::Text("{not json".into())).await.unwrap();
    assert!(matches!(next(&mut ws).await.message, ServerMessage::Error { code: ErrorCode::BadMessage, .. }));
}

#[tokio::test]
async fn pose_updates_are_tick_ordered() {
    let gw = launch(GatewayConfig::default()).await;
    let mut ws = connect(gw.addr).await;
    send(&mut ws, serde_json::json!({"type": "Start", "path": "path1"})).await;
    assert!(matches!(next(&mut ws).await.message, ServerMessage::SessionStarted { .. }));
    for _ in 0..3 {
        send(&mut ws, serde_json::json!({"type": "Steer", "action": "forward"})).await;
    }
    let (mut last_tick, mut last_t) = (0, -1.0);
    let mut poses = 0;
    let mut pose_seen_this_tick = 0;
    while poses < 10 {
        let e = next(&mut ws).await;
        assert!(e.tick >= last_tick);
        match e.message {
            ServerMessage::PoseUpdate { t_s, .. } => {
                assert!(e.tick > last_tick && t_s > last_t);
                (last_tick, last_t, pose_seen_this_tick) = (e.tick, t_s, e.tick);
                poses += 1;
            }
            ServerMessage::CueEvent { .. } => assert_eq!(pose_seen_this_tick, e.tick, "cue before its pose"),
            _ => {}
        }
    }
}

#[tokio::test]
async fn concurrent_sessions_are_isolated_and_disposed() {
    let gw = launch(GatewayConfig::default()).await;
    let mut a = connect(gw.addr).await;
    let mut b = connect(gw.addr).await;
    send(&mut a, serde_json::json!({"type": "Start", "path": "path1"})).await;
    send(&mut b, serde_json::json!({"type": "Start", "path": "path2"})).await;
    let ida = next(&mut a).await.session_id;
    let idb = next(&mut b).await.session_id;
    assert_ne!(ida, idb);
    send(&mut a, serde_json::json!({"type": "Steer", "action": "left"})).await;
    for _ in 0..30 {
        let (ea, eb) = (next(&mut a).await, next(&mut b).await);
        assert_eq!(ea.session_id, ida);
        assert_eq!(eb.session_id, idb);
        if let ServerMessage::PoseUpdate { pose, .. } = eb.message {
            // b never steered: it stays at path2's start
            assert_eq!((pose.x_m, pose.y_m), (1.0, 5.0));
        }
    }
    wait_for_sessions(&gw.counter, 2).await;
    drop(a);
    wait_for_sessions(&gw.counter, 1).await;
    b.close(None).await.unwrap();
    wait_for_sessions(&gw.counter, 0).await;
}

#[tokio::test]
async fn shutdown_closes_sessions() {
    let mut gw = launch(GatewayConfig::default()).await;
    let mut ws = connect(gw.addr).await;
    send(&mut ws, serde_json::json!({"type": "Start", "path": "path1"})).await;
    next(&mut ws).await;
    gw.stop.take().unwrap().send(()).unwrap();
    let closed = tokio::time::timeout(Duration::from_secs(10), async {
        while let Some(Ok(m)) = ws.next().await {
            if m.is_close() {
                return true;
            }
        }
        true
    })
    .await
    .unwrap();
    assert!(closed);
    tokio::time::timeout(Duration::from_secs(10), gw.task).await.unwrap().unwrap().unwrap();
}

#[tokio::test]
async fn port_in_use_is_a_bind_error() {
    let gw = launch(GatewayConfig::default()).await;
    let err = Gateway::bind(GatewayConfig { bind: gw.addr, ..GatewayConfig::default() }).await.err().unwrap();
    assert!(matches!(err, GatewayError::Bind { .. }));
}

fn pilot(path: &Path, pose: &Pose, index: usize) -> &'static str {
    let Some(target) = path.waypoints.get(index) else { return "stop" };
    let err = normalize_deg(pose.bearing_to(*target) - pose.heading_deg);
    if err > 5.0 {
        "left"
    } else if err < -5.0 {
        "right"
    } else {
        "forward"
    }
}

#[tokio::test]
async fn scripted_client_completes_a_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GatewayConfig {
        session: SessionConfig { tick_hz: 100.0, time_scale: 5.0, ..SessionConfig::default() },
        results_dir: Some(dir.path().to_path_buf()),
        ..GatewayConfig::default()
    };
    let gw = launch(cfg).await;
    let mut ws = connect(gw.addr).await;
    send(&mut ws, serde_json::json!({"type": "Start", "path": "path1"})).await;
    let started = next(&mut ws).await;
    let ServerMessage::SessionStarted { path, .. } = started.message else { panic!() };
    let mut steers = 0;
    let mut last = "";
    let done = loop {
        let e = next(&mut ws).await;
        match e.message {
            ServerMessage::PoseUpdate { pose, waypoint_index, .. } => {
                let action = pilot(&path, &pose, waypoint_index);
                if action != last {
                    send(&mut ws, serde_json::json!({"type": "Steer", "action": action})).await;
                    steers += 1;
                    last = action;
                }
            }
            ServerMessage::TrialComplete { completed, metrics, .. } => break (completed, metrics),
            ServerMessage::Error { text, .. } => panic!("{text}"),
            _ => {}
        }
    };
    assert!(done.0);
    assert_eq!(done.1.waypoints_reached, 6);
    assert!(steers > 5);
    let file = dir.path().join(format!("{}.json", started.session_id));
    for _ in 0..100 {
        if file.exists() {
            break;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
    assert_eq!(rec["completed"], true);
}
