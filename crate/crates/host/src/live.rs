//! Streams a simulated fleet to a running server over TCP in (scaled) real
//! time, one connection per device.

use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use mrhost_core::protocol::encode;
use mrhost_core::sim::{simulate_devices, DeviceStream, SimConfig};
use mrhost_core::{ConfigError, ExecMode, SceneConfig};
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;
use tokio::time::Instant;
use tracing::{info, warn};

pub const RECONNECT_DELAY: Duration = Duration::from_secs(2);

#[derive(Debug, Error)]
pub enum LiveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("speed must be a positive finite multiplier, got {0}")]
    Speed(f64),
    #[error("cannot connect to {addr}: {source}")]
    Connect { addr: String, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LiveReport {
    pub devices: usize,
    pub messages_sent: u64,
    pub reconnects: u64,
}

/// Replays `duration_s` seconds of simulated fleet against `addr`, compressing
/// time by `speed`. Fails up front when the server cannot be reached.
pub async fn run_live(
    addr: &str,
    scene: &SceneConfig,
    sim: &SimConfig,
    duration_s: f64,
    speed: f64,
) -> Result<LiveReport, LiveError> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(LiveError::Speed(speed));
    }
    let streams = simulate_devices(scene, sim, duration_s, ExecMode::default())?;
    let mut sockets = Vec::with_capacity(streams.len());
    for _ in &streams {
        let s = connect(addr).await.map_err(|source| LiveError::Connect { addr: addr.to_string(), source })?;
        sockets.push(s);
    }
    info!(devices = streams.len(), addr, speed, duration_s, "streaming");

    let sent = Arc::new(AtomicU64::new(0));
    let reconnects = Arc::new(AtomicU64::new(0));
    let start = Instant::now();
    let end = start + Duration::from_secs_f64(duration_s / speed);
    let mut tasks = Vec::new();
    for (stream, socket) in streams.into_iter().zip(sockets) {
        let device =
            Device { addr: addr.to_string(), start, end, speed, sent: sent.clone(), reconnects: reconnects.clone() };
        tasks.push(tokio::spawn(device.run(stream, socket)));
    }
    let devices = tasks.len();
    for t in tasks {
        let _ = t.await;
    }
    tokio::time::sleep_until(end).await;
    Ok(LiveReport {
        devices,
        messages_sent: sent.load(Ordering::Relaxed),
        reconnects: reconnects.load(Ordering::Relaxed),
    })
}

async fn connect(addr: &str) -> io::Result<TcpStream> {
    let s = TcpStream::connect(addr).await?;
    s.set_nodelay(true)?;
    Ok(s)
}

struct Device {
    addr: String,
    start: Instant,
    end: Instant,
    speed: f64,
    sent: Arc<AtomicU64>,
    reconnects: Arc<AtomicU64>,
}

impl Device {
    fn due(&self, t: Option<u64>) -> Instant {
        let device_ms = t.unwrap_or(0) as f64;
        self.start + Duration::from_secs_f64(device_ms / 1000.0 / self.speed)
    }

    async fn run(self, stream: DeviceStream, mut socket: TcpStream) {
        let hello = encode(&stream.messages[0]);
        let mut i = 0;
        while i < stream.messages.len() {
            let msg = &stream.messages[i];
            let due = self.due(msg.t());
            tokio::time::sleep_until(due).await;
            if socket.write_all(&encode(msg)).await.is_ok() {
                self.sent.fetch_add(1, Ordering::Relaxed);
                i += 1;
                continue;
            }
            warn!(id = %stream.id, "connection lost; reconnecting in {RECONNECT_DELAY:?}");
            match self.reconnect(&hello).await {
                Some(s) => socket = s,
                None => return,
            }
            // messages that fell due while disconnected are skipped
            let now = Instant::now();
            while i < stream.messages.len() && self.due(stream.messages[i].t()) < now {
                i += 1;
            }
        }
        let _ = socket.shutdown().await;
    }

    async fn reconnect(&self, hello: &[u8]) -> Option<TcpStream> {
        loop {
            tokio::time::sleep(RECONNECT_DELAY).await;
            if Instant::now() >= self.end {
                return None;
            }
            if let Ok(mut s) = connect(&self.addr).await {
                if s.write_all(hello).await.is_ok() {
                    self.reconnects.fetch_add(1, Ordering::Relaxed);
                    self.sent.fetch_add(1, Ordering::Relaxed);
                    return Some(s);
                }
            }
        }
    }
}
