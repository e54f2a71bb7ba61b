use super::{CircleSet, EventMarker, MarkerKind, VizConfig};
use crate::color::{lerp_color, Rgba};
use crate::math::Vec3;
use crate::session::{SystemEvent, SystemEventKind};
use crate::telemetry::Millis;

pub const MAX_CALIB_CIRCLES: u64 = 8;
const FIRST_RADIUS: f64 = 0.4;
const RADIUS_STEP: f64 = 0.15;

fn age_s(since: Millis, now: Millis) -> f64 {
    now.saturating_sub(since) as f64 / 1000.0
}

/// Marker at the last known position of a visitor that went offline.
pub fn offline_marker(event: &SystemEvent, now: Millis) -> Option<EventMarker> {
    match event.kind {
        SystemEventKind::WentOffline { last_position: Some(position) } => {
            Some(EventMarker { position, marker: MarkerKind::Offline, age_s: age_s(event.t, now) })
        }
        _ => None,
    }
}

/// Marker where tracking was lost.
pub fn tracking_marker(position: Vec3, since: Millis, now: Millis) -> EventMarker {
    EventMarker { position, marker: MarkerKind::TrackingLost, age_s: age_s(since, now) }
}

/// Concentric rings around a station, one per calibration up to a cap,
/// shading from blue to red as the count grows.
pub fn calib_circles(station: Vec3, count: u64, _cfg: &VizConfig) -> CircleSet {
    let n = count.min(MAX_CALIB_CIRCLES) as usize;
    let radii = (0..n).map(|i| FIRST_RADIUS + RADIUS_STEP * i as f64).collect();
    let colors = (0..n)
        .map(|i| if n == 1 { Rgba::BLUE } else { lerp_color(Rgba::BLUE, Rgba::RED, i as f64 / (n - 1) as f64) })
        .collect();
    CircleSet { center: station, radii, colors }
}
