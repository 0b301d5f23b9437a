//! WebSocket transport for [`Session`]. One task owns the session and
//! steps it at a fixed rate; socket tasks talk to it through queues.

use std::future::Future;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};

use drivesim::session::{Role, ServerMessage, Session};

struct Inbound {
    text: String,
    role: Role,
    reply: mpsc::UnboundedSender<String>,
}

#[derive(Clone)]
struct AppState {
    inbound: mpsc::UnboundedSender<Inbound>,
    frames: broadcast::Sender<Arc<str>>,
    driver_connected: Arc<AtomicBool>,
    tick: Arc<std::sync::atomic::AtomicU64>,
}

#[derive(Deserialize)]
struct RoleQuery {
    role: Option<Role>,
}

/// Run the session until `shutdown` resolves, then hand it back (e.g. so
/// an open recording can be saved).
pub async fn serve(
    listener: TcpListener,
    mut session: Session,
    rate_hz: f64,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> anyhow::Result<Session> {
    let (inbound_tx, mut inbound_rx) = mpsc::unbounded_channel::<Inbound>();
    let (frames_tx, _) = broadcast::channel::<Arc<str>>(64);
    let tick = Arc::new(std::sync::atomic::AtomicU64::new(session.tick()));
    let state = AppState {
        inbound: inbound_tx,
        frames: frames_tx.clone(),
        driver_connected: Arc::new(AtomicBool::new(false)),
        tick: tick.clone(),
    };
    let app = Router::new().route("/ws", get(upgrade)).with_state(state);

    let (stop_tx, mut stop_rx) = oneshot::channel::<()>();
    let (http_stop_tx, http_stop_rx) = oneshot::channel::<()>();
    tokio::spawn(async move {
        shutdown.await;
        let _ = stop_tx.send(());
    });
    let http = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = http_stop_rx.await;
            })
            .await
    });

    let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / rate_hz));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = &mut stop_rx => break,
            _ = interval.tick() => {
                while let Ok(msg) = inbound_rx.try_recv() {
                    if let Some(reply) = session.handle_text(&msg.text, msg.role) {
                        let _ = msg.reply.send(reply.to_json());
                    }
                }
                let frame = session.step()?;
                tick.store(frame.tick, Ordering::SeqCst);
                let _ = frames_tx.send(ServerMessage::Frame(Box::new(frame)).to_json().into());
            }
        }
    }
    let _ = http_stop_tx.send(());
    drop(frames_tx);
    let _ = http.await;
    Ok(session)
}

async fn upgrade(ws: WebSocketUpgrade, Query(q): Query<RoleQuery>, State(state): State<AppState>) -> Response {
    let role = q.role.unwrap_or(Role::Observer);
    ws.on_upgrade(move |socket| client(socket, role, state))
}

async fn client(socket: WebSocket, role: Role, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    if role == Role::Driver && state.driver_connected.swap(true, Ordering::SeqCst) {
        let msg = ServerMessage::error("a driver is already connected").to_json();
        let _ = sink.send(Message::Text(msg.into())).await;
        let _ = sink.send(Message::Close(None)).await;
        return;
    }
    // Subscribe before greeting so no frame after the greeting is missed.
    let mut frames = state.frames.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    let hello = ServerMessage::Hello {
        role,
        tick: state.tick.load(Ordering::SeqCst),
    };
    let mut ok = sink.send(Message::Text(hello.to_json().into())).await.is_ok();
    while ok {
        tokio::select! {
            frame = frames.recv() => match frame {
                Ok(f) => ok = sink.send(Message::Text(f.as_ref().into())).await.is_ok(),
                Err(broadcast::error::RecvError::Lagged(_)) => {}
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(reply) = reply_rx.recv() => {
                ok = sink.send(Message::Text(reply.into())).await.is_ok();
            }
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let _ = state.inbound.send(Inbound {
                        text: text.to_string(),
                        role,
                        reply: reply_tx.clone(),
                    });
                }
                Some(Ok(Message::Binary(_))) => {
                    // Binary frames are not part of the protocol; count them
                    // as malformed like any other undecodable frame.
                    let _ = state.inbound.send(Inbound {
                        text: String::new(),
                        role,
                        reply: reply_tx.clone(),
                    });
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    if role == Role::Driver {
        state.driver_connected.store(false, Ordering::SeqCst);
    }
}
