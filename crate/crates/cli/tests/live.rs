use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;

use drivesim::formats::RunConfig;
use drivesim::scenarios::preset;
use drivesim::session::Session;
use drivesim_cli::server::serve;

type Socket =
    tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_json(ws: &mut Socket) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("server answers in time")
            .expect("stream open")
            .expect("valid frame");
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

/// Skip frames until a non-frame message arrives.
async fn next_reply(ws: &mut Socket) -> Value {
    loop {
        let v = next_json(ws).await;
        if v["type"] != "frame" {
            return v;
        }
    }
}

async fn send(ws: &mut Socket, text: &str) {
    ws.send(Message::Text(text.into())).await.unwrap();
}

/// Reset, record a short drive one control per frame, and return the path
/// of the saved log.
async fn drive_recorded(driver: &mut Socket) -> String {
    send(driver, r#"{"type":"reset"}"#).await;
    send(driver, r#"{"type":"record_start"}"#).await;
    assert_eq!(next_reply(driver).await["command"], "reset");
    assert_eq!(next_reply(driver).await["command"], "record_start");

    let mut sent = 0;
    let mut last_tick = 0;
    while sent < 60 {
        let v = next_json(driver).await;
        if v["type"] != "frame" {
            continue;
        }
        if v["recording"] != true {
            assert_eq!(sent, 0, "recording stopped early");
            continue;
        }
        assert!(v["terminal"].is_null(), "{v}");
        let tick = v["tick"].as_u64().unwrap();
        assert!(tick > last_tick || sent == 0, "ticks advance");
        last_tick = tick;
        let accel = if sent < 40 { "accelerate" } else { "brake" };
        send(
            driver,
            &format!(
                r#"{{"type":"control","steer":"{}","accel":"{accel}"}}"#,
                match sent % 10 {
                    3 => "left",
                    7 => "right",
                    _ => "none",
                }
            ),
        )
        .await;
        sent += 1;
    }
    send(driver, r#"{"type":"record_stop"}"#).await;
    let stop = next_reply(driver).await;
    assert_eq!(stop["command"], "record_stop", "{stop}");
    stop["detail"].as_str().unwrap().to_string()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn live_session_records_a_replayable_drive() {
    let dir = tempfile::tempdir().unwrap();
    let session = Session::new(
        RunConfig::default(),
        preset("straight_highway").unwrap(),
        None,
        dir.path().join("recordings"),
    )
    .unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("ws://{}/ws", listener.local_addr().unwrap());
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, session, 50.0, async {
        let _ = stop_rx.await;
    }));

    let (mut driver, _) = tokio_tungstenite::connect_async(format!("{url}?role=driver"))
        .await
        .unwrap();
    let hello = next_json(&mut driver).await;
    assert_eq!(hello["type"], "hello");
    assert_eq!(hello["role"], "driver");

    let (mut intruder, _) = tokio_tungstenite::connect_async(format!("{url}?role=driver"))
        .await
        .unwrap();
    assert_eq!(next_json(&mut intruder).await["type"], "error");

    let (mut observer, _) = tokio_tungstenite::connect_async(format!("{url}?role=observer"))
        .await
        .unwrap();
    assert_eq!(next_json(&mut observer).await["role"], "observer");
    send(&mut observer, r#"{"type":"reset"}"#).await;
    assert_eq!(next_reply(&mut observer).await["type"], "error");

    send(&mut driver, "not json").await;
    let mut path = String::new();
    for _attempt in 0..5 {
        path = drive_recorded(&mut driver).await;
        let log = drivesim::eval::TrajectoryLog::load(std::path::Path::new(&path)).unwrap();
        // Reset and record_start normally land in the same tick; retry if a
        // tick boundary fell between them.
        if log.rows[0].tick == 0 {
            break;
        }
    }

    let frames_seen = {
        let mut n = 0;
        while n < 3 {
            if next_json(&mut observer).await["type"] == "frame" {
                n += 1;
            }
        }
        n
    };
    assert_eq!(frames_seen, 3);

    stop_tx.send(()).unwrap();
    let mut session = server.await.unwrap().unwrap();
    assert_eq!(session.malformed_count(), 1);
    assert!(session.close().unwrap().is_none());

    let log = drivesim::eval::TrajectoryLog::load(std::path::Path::new(&path)).unwrap();
    assert_eq!(log.header.scenario, "straight_highway");
    assert!(log.rows.len() > 40);
    let steered = log
        .rows
        .iter()
        .filter_map(|r| r.action)
        .filter(|a| a.steer != drivesim::sim::SteerCmd::None)
        .count();
    assert!(steered > 0, "controls reached the simulation");

    let replay = std::process::Command::new(env!("CARGO_BIN_EXE_drivesim"))
        .args([
            "--out",
            dir.path().join("replay").to_str().unwrap(),
            "replay",
            "--log",
            &path,
        ])
        .output()
        .unwrap();
    assert!(
        replay.status.success(),
        "offline re-simulation differs: {}{}",
        String::from_utf8_lossy(&replay.stdout),
        String::from_utf8_lossy(&replay.stderr)
    );
}
