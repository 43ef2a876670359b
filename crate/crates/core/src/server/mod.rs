//! Live mode. One task owns the [`Performance`] and applies every
//! command in arrival order; WebSocket connections only parse and forward.
//! Each client has its own outgoing queue, so its messages arrive in the
//! order the loop produced them.

mod protocol;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tokio::time::Instant;

use crate::runtime::{Performance, RejectReason, RuntimeError, Selection};
use crate::score::Score;
use crate::simulator::{SimAudience, SimulatorConfig};

pub use protocol::{ClientMessage, Meta, MetaGroup, Phase, ServerMessage};

const CLIENT_PAGE: &str = include_str!("client.html");

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("bad simulated audience: {0}")]
    Simulator(String),
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub addr: SocketAddr,
    /// Performance seconds per wall-clock second. Zero freezes the clock.
    pub speed: f64,
    /// An in-process simulated audience playing alongside real clients.
    pub sim: Option<SimulatorConfig>,
}

impl ServeOptions {
    pub fn new(addr: SocketAddr) -> Self {
        ServeOptions {
            addr,
            speed: 1.0,
            sim: None,
        }
    }
}

/// A running server. Dropping it does not stop the server; call
/// [`ServerHandle::shutdown`].
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        let _ = self.task.await;
    }

    /// Waits until the server stops on its own.
    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

enum Outgoing {
    Msg(ServerMessage),
    Close(String),
}

enum Command {
    Connect {
        requested: Option<String>,
        out: mpsc::UnboundedSender<Outgoing>,
        reply: oneshot::Sender<u64>,
    },
    Message {
        conn: u64,
        msg: ClientMessage,
    },
    Disconnect {
        conn: u64,
    },
}

#[derive(Clone)]
struct AppState {
    score: Arc<Score>,
    commands: mpsc::UnboundedSender<Command>,
    phase: watch::Receiver<Phase>,
}

/// Binds, starts the performance at time 0 and serves until shut down.
pub async fn serve(score: Arc<Score>, options: ServeOptions) -> Result<ServerHandle, ServeError> {
    let perf = Performance::new(score.clone())?;
    let audience = match &options.sim {
        Some(c) => Some(SimAudience::new(c).map_err(|e| ServeError::Simulator(e.to_string()))?),
        None => None,
    };
    let listener = TcpListener::bind(options.addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: options.addr,
            source,
        })?;
    let addr = listener.local_addr().map_err(|source| ServeError::Bind {
        addr: options.addr,
        source,
    })?;

    let (commands, rx) = mpsc::unbounded_channel();
    let (phase_tx, phase) = watch::channel(Phase::Running);
    let performance = PerformanceLoop {
        perf,
        audience,
        clock: Clock {
            start: Instant::now(),
            speed: options.speed.max(0.0),
        },
        clients: BTreeMap::new(),
        by_participant: BTreeMap::new(),
        next_conn: 1,
        next_guest: 1,
        broadcast_revision: 0,
        phase: phase_tx,
    };
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let loop_task = tokio::spawn(performance.run(rx));

    let app = Router::new()
        .route("/", get(index))
        .route("/meta", get(meta))
        .route("/ws", get(ws_upgrade))
        .with_state(AppState {
            score,
            commands,
            phase,
        });
    let task = tokio::spawn(async move {
        let shutdown = async {
            let _ = stop_rx.await;
        };
        if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
            tracing::error!("server stopped: {e}");
        }
        loop_task.abort();
    });
    tracing::info!("serving on http://{addr}");
    Ok(ServerHandle {
        addr,
        stop: Some(stop_tx),
        task,
    })
}

async fn index() -> Html<&'static str> {
    Html(CLIENT_PAGE)
}

async fn meta(State(s): State<AppState>) -> Json<Meta> {
    Json(Meta::new(&s.score, *s.phase.borrow()))
}

#[derive(Debug, Deserialize)]
struct WsQuery {
    participant: Option<String>,
}

async fn ws_upgrade(
    ws: WebSocketUpgrade,
    Query(q): Query<WsQuery>,
    State(s): State<AppState>,
) -> impl IntoResponse {
    ws.on_upgrade(move |socket| session(socket, q.participant, s.commands))
}

async fn session(
    socket: WebSocket,
    requested: Option<String>,
    commands: mpsc::UnboundedSender<Command>,
) {
    let (out_tx, mut out_rx) = mpsc::unbounded_channel();
    let (reply_tx, reply_rx) = oneshot::channel();
    let connect = Command::Connect {
        requested,
        out: out_tx.clone(),
        reply: reply_tx,
    };
    if commands.send(connect).is_err() {
        return;
    }
    let Ok(conn) = reply_rx.await else { return };
    let (mut sink, mut stream) = socket.split();

    let writer = tokio::spawn(async move {
        while let Some(out) = out_rx.recv().await {
            match out {
                Outgoing::Msg(m) => {
                    if sink.send(Message::Text(m.to_json().into())).await.is_err() {
                        break;
                    }
                }
                Outgoing::Close(reason) => {
                    let frame = CloseFrame {
                        code: 4000,
                        reason: reason.into(),
                    };
                    let _ = sink.send(Message::Close(Some(frame))).await;
                    break;
                }
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        match ClientMessage::parse(&text) {
            Ok(msg) => {
                if commands.send(Command::Message { conn, msg }).is_err() {
                    break;
                }
            }
            Err(e) => {
                let _ = out_tx.send(Outgoing::Msg(ServerMessage::Error {
                    message: format!("malformed message: {e}"),
                }));
            }
        }
        if writer.is_finished() {
            break;
        }
    }
    let _ = commands.send(Command::Disconnect { conn });
    drop(out_tx);
    let _ = writer.await;
}

struct Clock {
    start: Instant,
    speed: f64,
}

impl Clock {
    fn now(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * self.speed
    }

    fn deadline(&self, t: f64) -> Option<Instant> {
        if self.speed <= 0.0 || !t.is_finite() {
            return None;
        }
        let secs = (t / self.speed).max(0.0);
        Some(self.start + Duration::from_secs_f64(secs.min(1e9)))
    }
}

struct Client {
    participant: String,
    out: mpsc::UnboundedSender<Outgoing>,
}

struct PerformanceLoop {
    perf: Performance,
    audience: Option<SimAudience>,
    clock: Clock,
    clients: BTreeMap<u64, Client>,
    by_participant: BTreeMap<String, u64>,
    next_conn: u64,
    next_guest: u64,
    broadcast_revision: u64,
    phase: watch::Sender<Phase>,
}

impl PerformanceLoop {
    async fn run(mut self, mut rx: mpsc::UnboundedReceiver<Command>) {
        self.broadcast_revision = self.perf.matrix().revision();
        loop {
            self.tick();
            let wake = self.next_wake();
            let cmd = match wake {
                Some(at) => tokio::select! {
                    c = rx.recv() => c,
                    _ = tokio::time::sleep_until(at) => continue,
                },
                None => rx.recv().await,
            };
            let Some(cmd) = cmd else { return };
            self.tick();
            self.handle(cmd);
        }
    }

    fn next_wake(&self) -> Option<Instant> {
        let mut t = self.perf.next_event_time();
        if let Some(a) = &self.audience {
            if self.running() {
                if let Some((at, _)) = a.next_due() {
                    t = Some(t.map_or(at, |x: f64| x.min(at)));
                }
            }
        }
        t.and_then(|t| self.clock.deadline(t))
    }

    fn running(&self) -> bool {
        *self.phase.borrow() == Phase::Running
    }

    /// Brings the performance up to the current time.
    fn tick(&mut self) {
        let now = self.clock.now().max(self.perf.now());
        if let Some(mut audience) = self.audience.take() {
            while self.running() {
                let Some((at, i)) = audience.next_due() else { break };
                if at > now {
                    break;
                }
                self.advance(at);
                match audience.act(i, &mut self.perf, at) {
                    Ok(_) => self.pump(),
                    Err(e) => self.fail(e),
                }
            }
            self.audience = Some(audience);
        }
        self.advance(now);
        self.broadcast_matrix();
    }

    fn advance(&mut self, to: f64) {
        self.perf.advance(to);
        for p in self.perf.take_played() {
            if let Some(conn) = self.by_participant.get(&p.participant_id) {
                self.send(
                    *conn,
                    ServerMessage::Played {
                        pattern_id: p.pattern_id.clone(),
                        participant_id: p.participant_id.clone(),
                    },
                );
            }
            self.send_all(ServerMessage::Feed {
                text: format!("{} plays {}", p.participant_id, p.pattern_id),
            });
        }
    }

    fn pump(&mut self) {
        match self.perf.pump() {
            Ok(_) => {
                if self.perf.is_terminated() && self.running() {
                    self.phase.send_replace(Phase::Finished);
                    self.send_all(ServerMessage::Feed {
                        text: "the score is over".into(),
                    });
                }
            }
            Err(e) => self.fail(e),
        }
    }

    fn fail(&mut self, e: RuntimeError) {
        tracing::error!("performance stopped: {e}");
        self.phase.send_replace(Phase::Finished);
        self.send_all(ServerMessage::Feed {
            text: format!("performance stopped: {e}"),
        });
    }

    fn broadcast_matrix(&mut self) {
        let rev = self.perf.matrix().revision();
        if rev != self.broadcast_revision {
            self.broadcast_revision = rev;
            self.send_all(ServerMessage::matrix(self.perf.snapshot()));
        }
    }

    fn send(&self, conn: u64, m: ServerMessage) {
        if let Some(c) = self.clients.get(&conn) {
            let _ = c.out.send(Outgoing::Msg(m));
        }
    }

    fn send_all(&self, m: ServerMessage) {
        for c in self.clients.values() {
            let _ = c.out.send(Outgoing::Msg(m.clone()));
        }
    }

    fn handle(&mut self, cmd: Command) {
        match cmd {
            Command::Connect {
                requested,
                out,
                reply,
            } => {
                let participant = match requested {
                    Some(p) if valid_participant(&p) => p,
                    _ => self.mint(),
                };
                if let Some(old) = self.by_participant.remove(&participant) {
                    if let Some(c) = self.clients.remove(&old) {
                        let _ = c.out.send(Outgoing::Close("replaced by a new connection".into()));
                    }
                }
                let conn = self.next_conn;
                self.next_conn += 1;
                self.by_participant.insert(participant.clone(), conn);
                self.clients.insert(
                    conn,
                    Client {
                        participant: participant.clone(),
                        out,
                    },
                );
                let _ = reply.send(conn);
                self.send(
                    conn,
                    ServerMessage::Hello {
                        participant_id: participant,
                    },
                );
                self.send(conn, ServerMessage::matrix(self.perf.snapshot()));
            }
            Command::Disconnect { conn } => {
                if let Some(c) = self.clients.remove(&conn) {
                    if self.by_participant.get(&c.participant) == Some(&conn) {
                        self.by_participant.remove(&c.participant);
                    }
                }
            }
            Command::Message { conn, msg } => {
                let Some(participant) = self.clients.get(&conn).map(|c| c.participant.clone())
                else {
                    return;
                };
                match msg {
                    ClientMessage::Ping {} => self.send(conn, ServerMessage::Pong {}),
                    ClientMessage::Select { pattern_id } => {
                        self.select(conn, &participant, pattern_id)
                    }
                }
            }
        }
    }

    fn select(&mut self, conn: u64, participant: &str, pattern_id: String) {
        let now = self.perf.now();
        match self.perf.select(participant, &pattern_id, now) {
            Err(e) => self.send(
                conn,
                ServerMessage::Error {
                    message: e.to_string(),
                },
            ),
            Ok(Selection::Admitted(a)) => {
                self.send(
                    conn,
                    ServerMessage::Ack {
                        pattern_id,
                        delay_seconds: a.delay,
                        position: a.position,
                        pending: a.pending,
                    },
                );
                self.pump();
                // A start due right now is announced after the ack.
                self.tick();
            }
            Ok(Selection::Rejected {
                pattern_id,
                reason,
                pending,
            }) => {
                self.send(
                    conn,
                    ServerMessage::Reject {
                        pattern_id,
                        reason,
                        pending,
                    },
                );
                if reason != RejectReason::PendingCapReached {
                    self.send(conn, ServerMessage::matrix(self.perf.snapshot()));
                }
            }
        }
    }

    fn mint(&mut self) -> String {
        loop {
            let id = format!("guest{}", self.next_guest);
            self.next_guest += 1;
            if !self.by_participant.contains_key(&id) {
                return id;
            }
        }
    }
}

fn valid_participant(p: &str) -> bool {
    !p.is_empty()
        && p.len() <= 64
        && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
