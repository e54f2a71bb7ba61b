use super::{HostView, Ribbon, RibbonPattern, Subject, VizConfig};
use crate::color::Rgba;
use crate::math::Vec3;
use crate::telemetry::DeviceMetrics;

/// Points per sampled curve.
pub const CURVE_SAMPLES: usize = 32;
/// Height above the floor for geometry laid on the floor, meters.
pub const FLOOR_LIFT: f64 = 0.01;
/// Link curves start this far ahead of the host's head...
pub const LINK_ANCHOR_FORWARD: f64 = 0.4;
/// ...and this far below it, so the start stays in peripheral view.
pub const LINK_ANCHOR_DOWN: f64 = 0.2;
/// Lateral distance of each traffic ribbon from the device-server axis.
const TRAFFIC_OFFSET: f64 = 0.025;
const TRAFFIC_ARC: f64 = 0.25;
const TRAFFIC_LOG_BPS: (f64, f64) = (3.0, 8.0);
const DOWNLINK_COLOR: Rgba = Rgba::opaque(0.2, 0.6, 1.0);
const UPLINK_COLOR: Rgba = Rgba::opaque(1.0, 0.6, 0.2);

/// `n` evenly spaced samples of the cubic Bezier curve through `p`.
pub fn bezier_points(p: [Vec3; 4], n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let u = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let v = 1.0 - u;
            p[0] * (v * v * v) + p[1] * (3.0 * v * v * u) + p[2] * (3.0 * v * u * u) + p[3] * (u * u * u)
        })
        .collect()
}

/// Widths growing linearly from `lo` at the first sample to `hi` at the last.
fn ramp(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * (i as f64 / (n - 1) as f64) }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Link {
    Curve(Ribbon),
    /// The visitor is close and in front of the host; no curve is drawn.
    Excluded,
}

impl Link {
    pub fn ribbon(self) -> Option<Ribbon> {
        match self {
            Link::Curve(r) => Some(r),
            Link::Excluded => None,
        }
    }
}

fn excluded(host: &HostView, target: Vec3, cfg: &VizConfig) -> bool {
    let to = target - host.pose.position;
    to.length() < cfg.exclusion_dist && host.pose.forward().angle_deg(to) < cfg.exclusion_half_angle
}

/// Sample points and widths of the host-to-visitor curve, or `None` when
/// the visitor falls in the exclusion cone.
pub fn link_path(host: &HostView, target: Vec3, cfg: &VizConfig) -> Option<(Vec<Vec3>, Vec<f64>)> {
    if excluded(host, target, cfg) {
        return None;
    }
    let q = host.pose.orientation;
    let p0 = host.pose.position + q.forward() * LINK_ANCHOR_FORWARD - q.up() * LINK_ANCHOR_DOWN;
    let p1 = p0 + q.forward();
    let p2 = target + Vec3::UP;
    let mut points = bezier_points([p0, p1, p2, target], CURVE_SAMPLES);
    if cfg.flatten_links {
        for p in &mut points {
            p.y = host.floor_y + FLOOR_LIFT;
        }
    }
    Some((points, ramp(cfg.curve_w_min, cfg.curve_w_max, CURVE_SAMPLES)))
}

/// Arrowed curve from the host to the visitor, narrow at the host end.
pub fn link_curve(host: &HostView, subject: &Subject, cfg: &VizConfig) -> Link {
    match link_path(host, subject.head.position, cfg) {
        None => Link::Excluded,
        Some((points, widths)) => Link::Curve(Ribbon {
            colors: vec![subject.color; points.len()],
            points,
            widths,
            pattern: RibbonPattern::Arrowed,
            anim_speed: 1.0,
            bidirectional: false,
        }),
    }
}

/// The link path colored by the visitor's frame rate.
pub fn fps_line(host: &HostView, subject: &Subject, cfg: &VizConfig) -> Option<Ribbon> {
    let (points, widths) = link_path(host, subject.head.position, cfg)?;
    Some(Ribbon {
        colors: vec![cfg.fps_color(subject.fps()); points.len()],
        points,
        widths,
        pattern: RibbonPattern::Plain,
        anim_speed: 0.0,
        bidirectional: false,
    })
}

/// Ribbon width for a bit rate, logarithmic between 1 kbit/s and 100 Mbit/s.
pub fn traffic_width(bps: f64, cfg: &VizConfig) -> f64 {
    let (lo, hi) = TRAFFIC_LOG_BPS;
    let u = ((bps.max(1.0).log10() - lo) / (hi - lo)).clamp(0.0, 1.0);
    cfg.curve_w_min + (cfg.curve_w_max - cfg.curve_w_min) * u
}

fn arc(from: Vec3, to: Vec3, lateral: Vec3) -> Vec<Vec3> {
    let d = to - from;
    let lift = Vec3::UP * (TRAFFIC_ARC * d.length());
    let p = [from, from + d * (1.0 / 3.0) + lift, from + d * (2.0 / 3.0) + lift, to].map(|p| p + lateral);
    bezier_points(p, CURVE_SAMPLES)
}

/// Downlink (server to device) and uplink (device to server) ribbons, side
/// by side. Width follows throughput; animation slows with latency.
pub fn net_traffic_curve(device: Vec3, server: Vec3, metrics: &DeviceMetrics, cfg: &VizConfig) -> Option<[Ribbon; 2]> {
    let axis = (server - device).try_normalize()?;
    let lateral = axis.cross(Vec3::UP).try_normalize().unwrap_or(Vec3::X) * TRAFFIC_OFFSET;
    let anim_speed = 2.0 / (metrics.latency_ms / 100.0).max(0.1);
    let ribbon = |points: Vec<Vec3>, bps: f64, color: Rgba| Ribbon {
        widths: vec![traffic_width(bps, cfg); points.len()],
        colors: vec![color; points.len()],
        points,
        pattern: RibbonPattern::Arrowed,
        anim_speed,
        bidirectional: false,
    };
    Some([
        ribbon(arc(server, device, lateral), metrics.net_in_bps, DOWNLINK_COLOR),
        ribbon(arc(device, server, -lateral), metrics.net_out_bps, UPLINK_COLOR),
    ])
}
