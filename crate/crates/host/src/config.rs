use std::path::{Path, PathBuf};

use mrhost_core::protocol::{DEFAULT_DASH_PORT, DEFAULT_INGEST_PORT};
use mrhost_core::session::{FilterParams, SessionConfig, DEFAULT_HEARTBEAT_TIMEOUT_MS};
use mrhost_core::telemetry::Millis;
use mrhost_core::{ConfigError, SceneConfig, VizConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TICK_HZ: f64 = 10.0;
pub const TICK_HZ_RANGE: (f64, f64) = (1.0, 60.0);

/// Server configuration file. Every field is optional; missing fields take
/// their defaults. Port 0 asks the OS for a free port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub ingest_port: u16,
    pub dash_port: u16,
    /// Snapshots per second.
    pub tick_hz: f64,
    pub heartbeat_timeout_ms: Millis,
    pub scene: SceneConfig,
    /// Visualization settings in effect at startup.
    pub viz: VizConfig,
    /// Trajectory decimation and live-window parameters.
    pub filter: FilterParams,
    /// Directory for session recordings; nothing is recorded when unset.
    pub record_dir: Option<PathBuf>,
    /// Built dashboard assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            ingest_port: DEFAULT_INGEST_PORT,
            dash_port: DEFAULT_DASH_PORT,
            tick_hz: DEFAULT_TICK_HZ,
            heartbeat_timeout_ms: DEFAULT_HEARTBEAT_TIMEOUT_MS,
            scene: SceneConfig::default(),
            viz: VizConfig::default(),
            filter: FilterParams::default(),
            record_dir: None,
            static_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {field}: {message}")]
    Parse { path: PathBuf, field: String, message: String },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: ConfigError },
}

impl LoadError {
    /// Dotted path of the offending field, when one is known.
    pub fn field(&self) -> Option<&str> {
        match self {
            LoadError::Io { .. } => None,
            LoadError::Parse { field, .. } => Some(field),
            LoadError::Invalid { source, .. } => Some(&source.field),
        }
    }
}

/// Parses `text`, reporting failures as `(field path, message)`.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, (String, String)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let field = if field == "." { "(root)".to_string() } else { field };
        (field, e.into_inner().to_string())
    })
}

/// Reads and parses a JSON file without any further validation.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    parse_json(&text).map_err(|(field, message)| LoadError::Parse { path: path.to_path_buf(), field, message })
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lo, hi) = TICK_HZ_RANGE;
        if !(self.tick_hz.is_finite() && (lo..=hi).contains(&self.tick_hz)) {
            return Err(ConfigError::new("tick_hz", format!("must be in [{lo}, {hi}], got {}", self.tick_hz)));
        }
        if self.heartbeat_timeout_ms == 0 {
            return Err(ConfigError::new("heartbeat_timeout_ms", "must be > 0"));
        }
        if self.ingest_port != 0 && self.ingest_port == self.dash_port {
            return Err(ConfigError::new("dash_port", "must differ from ingest_port"));
        }
        self.scene.validate()?;
        self.viz.validate().map_err(|e| ConfigError::new(format!("viz.{}", e.field), e.message))?;
        if let Some(name) = self.filter.invalid_field() {
            return Err(ConfigError::new(format!("filter.{name}"), "must be > 0"));
        }
        Ok(())
    }

    /// Parses JSON text without validating it.
    pub fn from_json(text: &str) -> Result<Self, (String, String)> {
        parse_json(text)
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let config: Self = read_json(path)?;
        config.validate().map_err(|source| LoadError::Invalid { path: path.to_path_buf(), source })?;
        Ok(config)
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig { heartbeat_timeout_ms: self.heartbeat_timeout_ms, filter: self.filter }
    }

    pub fn tick_period(&self) -> std::time::Duration {
        std::time::Duration::from_secs_f64(1.0 / self.tick_hz)
    }
}
