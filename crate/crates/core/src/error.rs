use thiserror::Error;

/// A configuration value failed validation. `field` is the dotted path of
/// the offending value, e.g. `tick_hz` or `scene.stations[2].position`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}
