//! Core of a co-located multiuser mixed-reality hosting system.
//!
//! Devices stream head and hand poses, performance metrics and events as
//! newline-delimited JSON ([`protocol`]). A [`session::Session`] keeps the
//! authoritative state of every visitor, and [`viz`] turns that state into
//! renderer-agnostic geometry for the host's dashboard. [`sim`] generates
//! synthetic fleets of devices for testing and load generation.

pub mod color;
pub mod error;
pub mod exec;
pub mod math;
pub mod protocol;
pub mod replay;
pub mod scene;
pub mod session;
pub mod sim;
pub mod telemetry;
pub mod viz;

pub use error::ConfigError;
pub use exec::ExecMode;
pub use math::{Pose, Quat, Vec3};
pub use protocol::{decode, encode, ClientMessage, ProtocolError};
pub use scene::SceneConfig;
pub use session::Session;
pub use telemetry::Millis;
pub use viz::{SceneSnapshot, VizConfig};
