//! Telemetry server for co-located multiuser MR sessions.
//!
//! [`Server`] accepts newline-delimited JSON telemetry from headsets over
//! TCP, keeps the session state, and broadcasts a full scene snapshot to
//! dashboards over WebSocket at a fixed tick rate. [`live::run_live`] drives
//! a server with the deterministic fleet simulator from `mrhost-core`.

pub mod config;
pub mod live;
pub mod server;

pub use config::{LoadError, ServerConfig};
pub use server::{ServeError, Server, ServerStats};

/// Installs a `tracing` subscriber honoring `RUST_LOG` (default `info`).
pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}
