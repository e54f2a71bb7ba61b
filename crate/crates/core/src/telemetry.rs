//! Per-device telemetry carried from headsets to the session engine.

use serde::{Deserialize, Serialize};

use crate::math::Pose;

/// Number of joints in a tracked hand (palm, wrist, 4 thumb, 4 × 5 fingers).
pub const HAND_JOINTS: usize = 26;

/// Milliseconds since session start.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Visitor,
    Host,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub fps: f64,
    pub battery: f64,
    pub cpu: f64,
    pub gpu: f64,
    pub net_in_bps: f64,
    pub net_out_bps: f64,
    pub latency_ms: f64,
}

impl DeviceMetrics {
    /// Name of the first field outside its allowed range, if any.
    pub fn invalid_field(&self) -> Option<&'static str> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let frac = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !nonneg(self.fps) {
            Some("fps")
        } else if !frac(self.battery) {
            Some("battery")
        } else if !frac(self.cpu) {
            Some("cpu")
        } else if !frac(self.gpu) {
            Some("gpu")
        } else if !nonneg(self.net_in_bps) {
            Some("net_in_bps")
        } else if !nonneg(self.net_out_bps) {
            Some("net_out_bps")
        } else if !nonneg(self.latency_ms) {
            Some("latency_ms")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HandFrame {
    pub tracked: bool,
    pub joints: Vec<Pose>,
}

impl HandFrame {
    pub fn untracked() -> Self {
        Self::default()
    }

    pub fn is_valid(&self) -> bool {
        let len_ok = if self.tracked { self.joints.len() == HAND_JOINTS } else { self.joints.is_empty() };
        len_ok && self.joints.iter().all(Pose::is_valid)
    }
}

/// Latest known state of one device, merged from pose and metrics messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub t: Millis,
    pub head: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<HandFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<HandFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<DeviceMetrics>,
}
