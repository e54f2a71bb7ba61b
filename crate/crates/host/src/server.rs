//! The running service.
//!
//! Devices stream into a shared [`Session`] from per-connection tasks. A
//! dedicated tick thread wakes `tick_hz` times per second, drains queued
//! dashboard controls, sweeps heartbeats, builds the snapshot and broadcasts
//! it to every `/ws` client. Geometry is only ever computed on that thread.

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, PoisonError};
use std::thread;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, Utf8Bytes, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use mrhost_core::protocol::{
    decode_control, encode_error, encode_history, encode_snapshot, encode_view, ControlMessage, HistoryReply,
    LineDecoder,
};
use mrhost_core::session::{ConnId, FilterParams, Recorder, SystemEvent};
use mrhost_core::telemetry::Millis;
use mrhost_core::viz::SnapshotBuilder;
use mrhost_core::{ConfigError, ExecMode, SceneConfig, Session, VizConfig};
use thiserror::Error;
use tokio::io::AsyncReadExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, watch};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;
use tracing::{debug, info, warn};

use crate::config::ServerConfig;

/// Snapshots a dashboard client may fall behind before it starts skipping.
const CLIENT_BACKLOG: usize = 16;
const READ_CHUNK: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot listen on {role} port {port}: {source}")]
    Bind { role: &'static str, port: u16, source: io::Error },
    #[error("cannot create recording directory {path}: {source}")]
    Record { path: PathBuf, source: io::Error },
}

impl ServeError {
    fn bind(role: &'static str, port: u16, source: io::Error) -> Self {
        let source = if source.kind() == io::ErrorKind::AddrInUse {
            io::Error::new(io::ErrorKind::AddrInUse, "port already in use")
        } else {
            source
        };
        ServeError::Bind { role, port, source }
    }
}

/// Counters readable while the server runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ServerStats {
    pub ticks: u64,
    /// Snapshots skipped by dashboard clients that could not keep up.
    pub lagged_snapshots: u64,
    pub dashboard_clients: u64,
    pub device_connections: u64,
    /// Longest time one tick spent building and encoding, microseconds.
    pub max_tick_work_us: u64,
}

#[derive(Default)]
struct Counters {
    ticks: AtomicU64,
    lagged_snapshots: AtomicU64,
    dashboard_clients: AtomicU64,
    device_connections: AtomicU64,
    max_tick_work_us: AtomicU64,
}

struct Control {
    msg: ControlMessage,
    reply: mpsc::UnboundedSender<Utf8Bytes>,
}

struct Shared {
    epoch: Instant,
    session: Mutex<Session>,
    controls: mpsc::UnboundedSender<Control>,
    snapshots: broadcast::Sender<Utf8Bytes>,
    latest: Mutex<Option<Utf8Bytes>>,
    shutdown: watch::Sender<bool>,
    next_conn: AtomicU64,
    counters: Counters,
}

impl Shared {
    fn now_ms(&self) -> Millis {
        self.epoch.elapsed().as_millis() as Millis
    }

    fn session(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(PoisonError::into_inner)
    }

    fn stopping(&self) -> bool {
        *self.shutdown.borrow()
    }
}

/// A started server. Dropping it without [`Server::shutdown`] leaves the
/// tick thread running until the process exits.
pub struct Server {
    shared: Arc<Shared>,
    ingest_addr: SocketAddr,
    dash_addr: SocketAddr,
    tick_thread: Option<thread::JoinHandle<()>>,
    tasks: Vec<JoinHandle<()>>,
}

impl Server {
    /// Validates the config, binds both ports and starts serving.
    pub async fn start(config: ServerConfig) -> Result<Self, ServeError> {
        Self::start_with(config, ExecMode::default()).await
    }

    pub async fn start_with(config: ServerConfig, mode: ExecMode) -> Result<Self, ServeError> {
        config.validate()?;
        let mut session = Session::new(config.session_config());
        if let Some(dir) = &config.record_dir {
            let rec = Recorder::create(dir).map_err(|source| ServeError::Record { path: dir.clone(), source })?;
            session = session.with_recorder(rec);
        }
        let ingest = TcpListener::bind(("0.0.0.0", config.ingest_port))
            .await
            .map_err(|e| ServeError::bind("ingest", config.ingest_port, e))?;
        let dash = TcpListener::bind(("0.0.0.0", config.dash_port))
            .await
            .map_err(|e| ServeError::bind("dashboard", config.dash_port, e))?;
        let ingest_addr = ingest.local_addr().map_err(|e| ServeError::bind("ingest", config.ingest_port, e))?;
        let dash_addr = dash.local_addr().map_err(|e| ServeError::bind("dashboard", config.dash_port, e))?;

        let (controls_tx, controls_rx) = mpsc::unbounded_channel();
        let (snapshots, _) = broadcast::channel(CLIENT_BACKLOG);
        let shared = Arc::new(Shared {
            epoch: Instant::now(),
            session: Mutex::new(session),
            controls: controls_tx,
            snapshots,
            latest: Mutex::new(None),
            shutdown: watch::Sender::new(false),
            next_conn: AtomicU64::new(0),
            counters: Counters::default(),
        });

        let tick = TickLoop {
            shared: shared.clone(),
            controls: controls_rx,
            builder: SnapshotBuilder::new(mode),
            scene: config.scene.clone(),
            viz: config.viz.clone(),
            period: config.tick_period(),
        };
        let tick_thread = thread::Builder::new()
            .name("mrhost-tick".into())
            .spawn(move || tick.run())
            .expect("spawning the tick thread");

        let tasks = vec![
            tokio::spawn(accept_devices(shared.clone(), ingest)),
            tokio::spawn(serve_dashboard(shared.clone(), dash, config.static_dir.clone())),
        ];
        info!(%ingest_addr, %dash_addr, tick_hz = config.tick_hz, "serving");
        Ok(Self { shared, ingest_addr, dash_addr, tick_thread: Some(tick_thread), tasks })
    }

    pub fn ingest_addr(&self) -> SocketAddr {
        self.ingest_addr
    }

    pub fn dash_addr(&self) -> SocketAddr {
        self.dash_addr
    }

    /// Milliseconds since startup; the clock used for receive times and
    /// snapshot `t`.
    pub fn now_ms(&self) -> Millis {
        self.shared.now_ms()
    }

    pub fn stats(&self) -> ServerStats {
        let c = &self.shared.counters;
        ServerStats {
            ticks: c.ticks.load(Ordering::Relaxed),
            lagged_snapshots: c.lagged_snapshots.load(Ordering::Relaxed),
            dashboard_clients: c.dashboard_clients.load(Ordering::Relaxed),
            device_connections: c.device_connections.load(Ordering::Relaxed),
            max_tick_work_us: c.max_tick_work_us.load(Ordering::Relaxed),
        }
    }

    /// Runs `f` against the live session while holding its lock.
    pub fn with_session<R>(&self, f: impl FnOnce(&Session) -> R) -> R {
        f(&self.shared.session())
    }

    /// Stops accepting, disconnects everyone and waits for the tick thread.
    pub async fn shutdown(mut self) {
        self.shared.shutdown.send_replace(true);
        for t in self.tasks.drain(..) {
            t.abort();
            let _ = t.await;
        }
        if let Some(handle) = self.tick_thread.take() {
            let _ = tokio::task::spawn_blocking(move || handle.join()).await;
        }
        self.shared.session().flush_recording();
        info!("stopped");
    }
}

struct TickLoop {
    shared: Arc<Shared>,
    controls: mpsc::UnboundedReceiver<Control>,
    builder: SnapshotBuilder,
    scene: SceneConfig,
    viz: VizConfig,
    period: Duration,
}

impl TickLoop {
    fn run(mut self) {
        let mut next = Instant::now() + self.period;
        while !self.shared.stopping() {
            let now = Instant::now();
            if next > now {
                thread::sleep(next - now);
            } else if now - next > self.period * 10 {
                warn!(behind_ms = (now - next).as_millis() as u64, "tick loop fell behind; resynchronizing");
                next = now;
            }
            next += self.period;
            if self.shared.stopping() {
                break;
            }
            self.tick();
        }
    }

    fn tick(&mut self) {
        let started = Instant::now();
        let now = self.shared.now_ms();
        let mut replies = Vec::new();
        let shared = self.shared.clone();
        let snapshot = {
            let mut session = shared.session();
            while let Ok(control) = self.controls.try_recv() {
                let reply = self.apply(control.msg, &mut session);
                if let Some(text) = reply {
                    replies.push((control.reply, text));
                }
            }
            for e in session.heartbeat_sweep(now) {
                log_event(&e);
            }
            let snapshot = self.builder.build(&session, &self.scene, &self.viz, now);
            session.flush_recording();
            snapshot
        };
        for (to, text) in replies {
            let _ = to.send(text);
        }
        let text = Utf8Bytes::from(encode_snapshot(&snapshot));
        {
            let mut latest = self.shared.latest.lock().unwrap_or_else(PoisonError::into_inner);
            *latest = Some(text.clone());
            let _ = self.shared.snapshots.send(text);
        }

        let c = &self.shared.counters;
        c.ticks.fetch_add(1, Ordering::Relaxed);
        c.max_tick_work_us.fetch_max(started.elapsed().as_micros() as u64, Ordering::Relaxed);
    }

    /// Applies one control message and returns the reply, if any.
    fn apply(&mut self, msg: ControlMessage, session: &mut Session) -> Option<Utf8Bytes> {
        match msg {
            ControlMessage::SetVizConfig { patch } => match self.viz.apply(&patch) {
                Ok(viz) => {
                    self.viz = viz;
                    None
                }
                Err(e) => Some(encode_error(&format!("rejected viz patch: {e}")).into()),
            },
            ControlMessage::SetHostPose { pose } => {
                self.builder.host_override = Some(pose);
                None
            }
            ControlMessage::SetTrailWindow { window_ms } => {
                let filter = FilterParams { window: window_ms, ..session.config().filter };
                session.set_filter(filter);
                None
            }
            ControlMessage::RequestHistory { visitor_id, up_to_t } => {
                let text = match session.get_history(&visitor_id, up_to_t.unwrap_or(Millis::MAX)) {
                    Ok(samples) => {
                        encode_history(&HistoryReply { visitor: visitor_id, up_to_t, samples: samples.to_vec() })
                    }
                    Err(e) => encode_error(&e.to_string()),
                };
                Some(text.into())
            }
        }
    }
}

fn log_event(e: &SystemEvent) {
    info!(t = e.t, visitor = %e.visitor_id, kind = ?e.kind, "session event");
}

async fn accept_devices(shared: Arc<Shared>, listener: TcpListener) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let _ = stream.set_nodelay(true);
                let conn = shared.next_conn.fetch_add(1, Ordering::Relaxed);
                shared.counters.device_connections.fetch_add(1, Ordering::Relaxed);
                debug!(conn, %peer, "device connected");
                tokio::spawn(device_connection(shared.clone(), stream, conn));
            }
            Err(e) => {
                warn!("accept failed: {e}");
                tokio::time::sleep(Duration::from_millis(50)).await;
            }
        }
    }
}

async fn device_connection(shared: Arc<Shared>, mut stream: TcpStream, conn: ConnId) {
    let mut stop = shared.shutdown.subscribe();
    let mut decoder = LineDecoder::new();
    let mut buf = vec![0u8; READ_CHUNK];
    loop {
        let n = tokio::select! {
            read = stream.read(&mut buf) => match read {
                Ok(0) | Err(_) => break,
                Ok(n) => n,
            },
            _ = stop.changed() => break,
        };
        let frames = decoder.push(&buf[..n]);
        if !frames.is_empty() {
            ingest(&shared, conn, frames);
        }
    }
    if let Some(last) = decoder.finish() {
        ingest(&shared, conn, vec![last]);
    }
    shared.session().disconnect(conn);
    debug!(conn, "device disconnected");
}

fn ingest(shared: &Shared, conn: ConnId, frames: Vec<Result<mrhost_core::ClientMessage, mrhost_core::ProtocolError>>) {
    let now = shared.now_ms();
    let mut session = shared.session();
    for frame in frames {
        match frame {
            Ok(msg) => match session.ingest(conn, msg, now) {
                Ok(events) => events.iter().for_each(log_event),
                Err(e) => debug!(conn, "dropped message: {e}"),
            },
            Err(e) => {
                session.note_decode_error();
                debug!(conn, "undecodable frame: {e}");
            }
        }
    }
}

const PLACEHOLDER_INDEX: &str = "<!doctype html><title>mrhost</title>\
<p>mrhost is running. No dashboard build is configured (<code>static_dir</code>); \
snapshots are available as JSON over the WebSocket at <code>/ws</code>.</p>";

async fn serve_dashboard(shared: Arc<Shared>, listener: TcpListener, static_dir: Option<PathBuf>) {
    let mut stop = shared.shutdown.subscribe();
    let router = Router::new().route("/ws", get(upgrade)).route("/views/{texture_ref}", get(view_frame));
    let router = match static_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    };
    let app = router.with_state(shared);
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            let _ = stop.wait_for(|s| *s).await;
        })
        .await;
    if let Err(e) = result {
        warn!("dashboard server stopped: {e}");
    }
}

/// Newest rendered-view frame behind a snapshot texture reference.
async fn view_frame(Path(texture_ref): Path<String>, State(shared): State<Arc<Shared>>) -> Response {
    let frame = shared.session().view_frame(&texture_ref);
    match frame {
        Some(f) => ([(header::CONTENT_TYPE, "application/json")], encode_view(&f)).into_response(),
        None => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    ws.on_upgrade(move |socket| dashboard_client(socket, shared))
}

async fn dashboard_client(mut socket: WebSocket, shared: Arc<Shared>) {
    let (mut snapshots, mut pending) = {
        let latest = shared.latest.lock().unwrap_or_else(PoisonError::into_inner);
        (shared.snapshots.subscribe(), latest.clone())
    };
    let mut stop = shared.shutdown.subscribe();
    let (reply_tx, mut replies) = mpsc::unbounded_channel();
    let counters = &shared.counters;
    counters.dashboard_clients.fetch_add(1, Ordering::Relaxed);

    loop {
        if let Some(text) = pending.take() {
            if socket.send(Message::Text(text)).await.is_err() {
                break;
            }
        }
        pending = tokio::select! {
            snap = snapshots.recv() => match snap {
                Ok(text) => Some(text),
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    counters.lagged_snapshots.fetch_add(n, Ordering::Relaxed);
                    None
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            reply = replies.recv() => reply,
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => match decode_control(text.as_str()) {
                    Ok(msg) => {
                        if shared.controls.send(Control { msg, reply: reply_tx.clone() }).is_err() {
                            break;
                        }
                        None
                    }
                    Err(e) => Some(encode_error(&e.to_string()).into()),
                },
                Some(Ok(Message::Binary(_))) => Some(encode_error("control messages must be text frames").into()),
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => None,
            },
            _ = stop.changed() => break,
        };
    }
    counters.dashboard_clients.fetch_sub(1, Ordering::Relaxed);
}
