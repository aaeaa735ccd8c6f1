//! Websocket host. Three tasks share a session: the engine task steps the
//! session at the frame rate, the client task moves messages between the
//! socket and the engine, and the logger task writes the event log and trial
//! tables. View frames travel through a latest-wins slot, so a slow client
//! loses frames but never stalls the engine or the log.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch, Mutex, OwnedMutexGuard};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

use crate::log::{LogError, SessionLog};
use crate::protocol::{ControlMsg, SessionMsg};
use crate::session::{LiveSession, LogItem, SessionConfig, SessionError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub host: IpAddr,
    /// 0 picks a free port.
    pub port: u16,
    pub session: SessionConfig,
    /// Event log destination; `None` keeps events in memory only.
    pub events_path: Option<PathBuf>,
    /// Step period; defaults to the session frame rate.
    pub frame_period: Option<Duration>,
}

impl ServeConfig {
    pub fn new(port: u16, session: SessionConfig) -> Self {
        Self { host: IpAddr::V4(Ipv4Addr::LOCALHOST), port, session, events_path: None, frame_period: None }
    }
}

enum EngineCmd {
    /// A client took the slot; the engine replies with its connection epoch.
    Connected(oneshot::Sender<u64>),
    Disconnected,
    Control(ControlMsg),
    Malformed(String),
}

/// Outgoing text stamped with the connection epoch it was produced for.
type Tagged = (u64, Arc<str>);

struct App {
    cmd_tx: mpsc::Sender<EngineCmd>,
    /// Ordered messages for the client. Holding the lock is what makes a
    /// connection the session's client.
    reliable_rx: Arc<Mutex<mpsc::UnboundedReceiver<Tagged>>>,
    frame_rx: watch::Receiver<Option<Tagged>>,
}

/// A server running in the background.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    http: JoinHandle<std::io::Result<()>>,
    engine: JoinHandle<Result<(), ServeError>>,
    logger: JoinHandle<Result<SessionLog, ServeError>>,
}

impl RunningServer {
    /// Stop accepting connections, stop the engine and return the log.
    pub async fn shutdown(mut self) -> Result<SessionLog, ServeError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.http.await.map_err(std::io::Error::other)??;
        self.engine.await.map_err(std::io::Error::other)??;
        self.logger.await.map_err(std::io::Error::other)?
    }

    /// Run until the engine stops or ctrl-c.
    pub async fn wait(self) -> Result<SessionLog, ServeError> {
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = wait_finished(&self.engine) => {}
        }
        self.shutdown().await
    }
}

async fn wait_finished<T>(h: &JoinHandle<T>) {
    while !h.is_finished() {
        tokio::time::sleep(Duration::from_millis(100)).await;
    }
}

/// Bind the listener and start the three tasks.
pub async fn start(cfg: ServeConfig) -> Result<RunningServer, ServeError> {
    let session = LiveSession::new(cfg.session.clone())?;
    let period = cfg.frame_period.unwrap_or_else(|| Duration::from_secs_f64(1.0 / session.fps()));
    let log = match &cfg.events_path {
        Some(p) => SessionLog::to_file(p)?,
        None => SessionLog::memory(),
    };
    let addr = SocketAddr::new(cfg.host, cfg.port);
    let listener = TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
    let addr = listener.local_addr()?;

    let (cmd_tx, cmd_rx) = mpsc::channel(256);
    let (reliable_tx, reliable_rx) = mpsc::unbounded_channel();
    let (frame_tx, frame_rx) = watch::channel(None);
    let (log_tx, log_rx) = mpsc::unbounded_channel();
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let (engine_stop_tx, engine_stop_rx) = oneshot::channel::<()>();

    let engine = tokio::spawn(engine_task(session, cmd_rx, reliable_tx, frame_tx, log_tx, period, engine_stop_rx));
    let logger = tokio::spawn(logger_task(log, log_rx));

    let app = Arc::new(App { cmd_tx, reliable_rx: Arc::new(Mutex::new(reliable_rx)), frame_rx });
    let router = Router::new()
        .route("/ws", get(ws_handler))
        .route("/", get(|| async { "deixis session host; connect a websocket to /ws\n" }))
        .with_state(app);
    let http = tokio::spawn(async move {
        let r = axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await;
        let _ = engine_stop_tx.send(());
        r
    });
    tracing::info!(%addr, "listening");
    Ok(RunningServer { addr, shutdown: Some(stop_tx), http, engine, logger })
}

async fn engine_task(
    mut session: LiveSession,
    mut cmd_rx: mpsc::Receiver<EngineCmd>,
    reliable_tx: mpsc::UnboundedSender<Tagged>,
    frame_tx: watch::Sender<Option<Tagged>>,
    log_tx: mpsc::UnboundedSender<LogItem>,
    period: Duration,
    mut stop: oneshot::Receiver<()>,
) -> Result<(), ServeError> {
    let mut ticker = tokio::time::interval(period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut running = false;
    let mut epoch = 0u64;
    let send = |epoch: u64, m: &SessionMsg| {
        let _ = reliable_tx.send((epoch, m.to_json().into()));
    };
    loop {
        tokio::select! {
            _ = &mut stop => break,
            cmd = cmd_rx.recv() => match cmd {
                None => break,
                Some(EngineCmd::Connected(reply)) => {
                    epoch += 1;
                    running = true;
                    send(epoch, &session.hello());
                    let _ = reply.send(epoch);
                }
                Some(EngineCmd::Disconnected) => running = false,
                Some(EngineCmd::Control(msg)) => {
                    let load = matches!(msg, ControlMsg::LoadReplay { .. });
                    for m in session.handle(msg) {
                        running |= load && matches!(m, SessionMsg::Scene(_));
                        send(epoch, &m);
                    }
                }
                Some(EngineCmd::Malformed(why)) => send(epoch, &SessionMsg::warning(format!("malformed message: {why}"))),
            },
            _ = ticker.tick(), if running => {
                let step = session.step()?;
                for item in step.log {
                    let _ = log_tx.send(item);
                }
                for m in &step.messages {
                    send(epoch, m);
                }
                if let Some(v) = step.view {
                    frame_tx.send_replace(Some((epoch, SessionMsg::FrameView(v).to_json().into())));
                }
                if step.finished {
                    running = false;
                    send(epoch, &SessionMsg::warning("end of recording"));
                }
            }
        }
    }
    Ok(())
}

async fn logger_task(mut log: SessionLog, mut rx: mpsc::UnboundedReceiver<LogItem>) -> Result<SessionLog, ServeError> {
    while let Some(item) = rx.recv().await {
        log.apply(&item)?;
        if matches!(item, LogItem::Block { .. }) {
            log.flush()?;
        }
    }
    log.flush()?;
    Ok(log)
}

async fn ws_handler(ws: WebSocketUpgrade, State(app): State<Arc<App>>) -> Response {
    let Ok(guard) = app.reliable_rx.clone().try_lock_owned() else {
        return (StatusCode::CONFLICT, "session already has a client\n").into_response();
    };
    ws.on_upgrade(move |socket| client_task(socket, app, guard))
}

async fn client_task(socket: WebSocket, app: Arc<App>, mut reliable: OwnedMutexGuard<mpsc::UnboundedReceiver<Tagged>>) {
    let (reply, epoch) = oneshot::channel();
    if app.cmd_tx.send(EngineCmd::Connected(reply)).await.is_err() {
        return;
    }
    let Ok(epoch) = epoch.await else { return };
    let mut frames = app.frame_rx.clone();
    frames.mark_unchanged();
    let (mut tx, mut rx) = socket.split();
    loop {
        tokio::select! {
            biased;
            m = reliable.recv() => match m {
                Some((e, _)) if e != epoch => {}
                Some((_, text)) => {
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                None => break,
            },
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(t))) => {
                    let cmd = match ControlMsg::parse(t.as_str()) {
                        Ok(c) => EngineCmd::Control(c),
                        Err(e) => EngineCmd::Malformed(e.to_string()),
                    };
                    if app.cmd_tx.send(cmd).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let _ = app.cmd_tx.send(EngineCmd::Malformed("binary messages are not accepted".into())).await;
                }
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            changed = frames.changed() => {
                if changed.is_err() {
                    break;
                }
                let view = frames.borrow_and_update().clone();
                if let Some((_, v)) = view.filter(|(e, _)| *e == epoch) {
                    if tx.send(Message::Text(v.as_ref().into())).await.is_err() {
                        break;
                    }
                }
            }
        }
    }
    let _ = app.cmd_tx.send(EngineCmd::Disconnected).await;
}
