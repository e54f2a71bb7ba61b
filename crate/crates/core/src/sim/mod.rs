//! Deterministic fleet simulator.
//!
//! Produces the message streams a fleet of headsets would send: a hello,
//! heartbeats on a fixed grid, head (and periodically hand) poses from a
//! waypoint walk, metrics with a draining battery, stub rendered-view
//! frames, Poisson calibration events at the nearest station, and scripted
//! incidents. Every visitor draws from its own random stream derived from
//! the master seed, so streams are identical whether visitors are generated
//! sequentially or in parallel.

mod motion;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

pub use motion::{Walker, MAX_TURN_DEG_S};

use crate::color::identity_color;
use crate::error::ConfigError;
use crate::exec::{map_ordered, ExecMode};
use crate::math::{Pose, Quat, Vec3};
use crate::protocol::{ClientMessage, EventKind, FrameFormat};
use crate::scene::{SceneConfig, EYE_HEIGHT};
use crate::telemetry::{DeviceMetrics, HandFrame, Millis, Role, HAND_JOINTS};

/// Frame rate reported during an `fps_dip` incident, Hz.
pub const DIP_FPS: f64 = 30.0;
/// Side length of the synthetic rendered-view frames, pixels.
pub const VIEW_SIZE: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidentKind {
    FpsDip,
    Offline,
    TrackingLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Incident {
    /// Seconds from session start.
    pub t_start: f64,
    /// Seconds.
    pub duration: f64,
    /// Visitor id, e.g. `"v03"`.
    pub visitor: String,
    pub kind: IncidentKind,
}

impl Incident {
    fn window_ms(&self) -> (Millis, Millis) {
        let start = (self.t_start * 1000.0).round() as Millis;
        (start, start + (self.duration * 1000.0).round() as Millis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_visitors: usize,
    /// m/s
    pub walk_speed: f64,
    pub pose_hz: f64,
    pub metrics_hz: f64,
    pub heartbeat_ms: Millis,
    /// Battery fraction lost per second.
    pub battery_drain: f64,
    pub fps_base: f64,
    pub fps_noise_sd: f64,
    pub scripted_incidents: Vec<Incident>,
    /// Calibration events per minute per visitor.
    pub calibration_rate: f64,
    /// Rate at which pose messages carry hand skeletons; 0 disables hands.
    pub hand_hz: f64,
    /// Rendered-view frames per second; 0 disables views.
    pub view_hz: f64,
    /// Adds a host client (`h01`) standing at the middle of the lowest floor.
    pub include_host: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_visitors: 8,
            walk_speed: 1.2,
            pose_hz: 20.0,
            metrics_hz: 1.0,
            heartbeat_ms: 500,
            battery_drain: 1.67e-4,
            fps_base: 72.0,
            fps_noise_sd: 1.5,
            scripted_incidents: Vec::new(),
            calibration_rate: 0.2,
            hand_hz: 5.0,
            view_hz: 0.5,
            include_host: false,
        }
    }
}

pub fn visitor_id(index: usize) -> String {
    format!("v{:02}", index + 1)
}

pub const HOST_ID: &str = "h01";

impl SimConfig {
    pub fn validate(&self, duration_s: f64) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(name, format!("must be > 0, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(name, format!("must be >= 0, got {v}")))
            }
        };
        if !(duration_s.is_finite() && duration_s >= 0.0) {
            return Err(ConfigError::new("duration", "must be a non-negative number of seconds"));
        }
        if self.n_visitors > 999 {
            return Err(ConfigError::new("n_visitors", "at most 999 visitors"));
        }
        positive("walk_speed", self.walk_speed)?;
        positive("pose_hz", self.pose_hz)?;
        positive("metrics_hz", self.metrics_hz)?;
        positive("fps_base", self.fps_base)?;
        if self.heartbeat_ms == 0 {
            return Err(ConfigError::new("heartbeat_ms", "must be > 0"));
        }
        nonneg("battery_drain", self.battery_drain)?;
        nonneg("fps_noise_sd", self.fps_noise_sd)?;
        nonneg("calibration_rate", self.calibration_rate)?;
        nonneg("hand_hz", self.hand_hz)?;
        nonneg("view_hz", self.view_hz)?;
        let session_ms = (duration_s * 1000.0).round() as Millis;
        for (i, inc) in self.scripted_incidents.iter().enumerate() {
            let field = format!("scripted_incidents[{i}]");
            let known = (0..self.n_visitors).any(|v| visitor_id(v) == inc.visitor);
            if !known {
                return Err(ConfigError::new(format!("{field}.visitor"), format!("no visitor `{}`", inc.visitor)));
            }
            if !(inc.t_start.is_finite() && inc.t_start >= 0.0 && inc.duration.is_finite() && inc.duration > 0.0) {
                return Err(ConfigError::new(field, "needs t_start >= 0 and duration > 0"));
            }
            if inc.window_ms().1 > session_ms {
                return Err(ConfigError::new(field, "must end within the session duration"));
            }
        }
        Ok(())
    }
}

/// All messages of one device, in send order. The first is its hello.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStream {
    pub id: String,
    pub messages: Vec<ClientMessage>,
}

/// Per-device streams, generated with the given execution mode.
pub fn simulate_devices(
    scene: &SceneConfig,
    sim: &SimConfig,
    duration_s: f64,
    mode: ExecMode,
) -> Result<Vec<DeviceStream>, ConfigError> {
    scene.validate()?;
    sim.validate(duration_s)?;
    let duration_ms = (duration_s * 1000.0).round() as Millis;
    let indices: Vec<usize> = (0..sim.n_visitors).collect();
    let mut streams = map_ordered(mode, &indices, |&i| visitor_stream(scene, sim, i, duration_ms));
    if sim.include_host && sim.n_visitors > 0 {
        streams.push(host_stream(scene, sim, duration_ms));
    }
    Ok(streams)
}

/// The whole fleet as one stream ordered by time: every hello first, then
/// messages by `(t, device order)`.
pub fn simulate(
    scene: &SceneConfig,
    sim: &SimConfig,
    duration_s: f64,
) -> Result<Vec<(String, ClientMessage)>, ConfigError> {
    simulate_with(scene, sim, duration_s, ExecMode::default())
}

pub fn simulate_with(
    scene: &SceneConfig,
    sim: &SimConfig,
    duration_s: f64,
    mode: ExecMode,
) -> Result<Vec<(String, ClientMessage)>, ConfigError> {
    Ok(merge_streams(simulate_devices(scene, sim, duration_s, mode)?))
}

pub fn merge_streams(streams: Vec<DeviceStream>) -> Vec<(String, ClientMessage)> {
    let mut hellos = Vec::new();
    let mut rest: Vec<(Millis, usize, String, ClientMessage)> = Vec::new();
    for (order, s) in streams.into_iter().enumerate() {
        for m in s.messages {
            match m.t() {
                None => hellos.push((s.id.clone(), m)),
                Some(t) => rest.push((t, order, s.id.clone(), m)),
            }
        }
    }
    // stable: keeps per-device order for equal keys
    rest.sort_by_key(|(t, order, _, _)| (*t, *order));
    hellos.extend(rest.into_iter().map(|(_, _, id, m)| (id, m)));
    hellos
}

fn device_rng(seed: u64, index: u64) -> ChaCha8Rng {
    // splitmix64 finalizer over the (seed, index) pair
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn period_ms(hz: f64) -> Millis {
    ((1000.0 / hz).round() as Millis).max(1)
}

enum Pending {
    Pose { head: Pose, hands: Option<(HandFrame, HandFrame)> },
    Metrics(DeviceMetrics),
    Event(EventKind, Option<String>),
    View(Vec<u8>),
}

fn visitor_stream(scene: &SceneConfig, sim: &SimConfig, index: usize, duration_ms: Millis) -> DeviceStream {
    let id = visitor_id(index);
    let mut rng = device_rng(sim.seed, index as u64);
    let incidents: Vec<&Incident> = sim.scripted_incidents.iter().filter(|i| i.visitor == id).collect();
    let in_incident = |kind: IncidentKind, t: Millis| {
        incidents.iter().any(|i| {
            let (a, b) = i.window_ms();
            i.kind == kind && t >= a && t < b
        })
    };

    let mut items: Vec<(Millis, Pending)> = Vec::new();

    // poses
    let pose_period = period_ms(sim.pose_hz);
    let pose_phase = if pose_period > 1 { rng.random_range(1..pose_period) } else { 0 };
    let hand_every = if sim.hand_hz > 0.0 { Some(((sim.pose_hz / sim.hand_hz).round() as u64).max(1)) } else { None };
    let mut walker = Walker::spawn(&mut rng, scene);
    let mut track: Vec<(Millis, Pose)> = Vec::new();
    let mut t = pose_phase;
    let mut k = 0u64;
    while t <= duration_ms {
        let dt = if k == 0 { 0.0 } else { pose_period as f64 / 1000.0 };
        let head = walker.step(&mut rng, scene, sim.walk_speed, dt, t as f64 / 1000.0);
        track.push((t, head));
        let hands = hand_every.filter(|n| k.is_multiple_of(*n)).map(|_| {
            let tracked = !in_incident(IncidentKind::TrackingLoss, t);
            (hand_frame(&head, true, tracked), hand_frame(&head, false, tracked))
        });
        items.push((t, Pending::Pose { head, hands }));
        t += pose_period;
        k += 1;
    }
    let position_at = |t: Millis| {
        let i = track.partition_point(|(pt, _)| *pt <= t);
        track[i.saturating_sub(1)].1.position
    };

    // metrics
    let metrics_period = period_ms(sim.metrics_hz);
    let mut t = rng.random_range(0..metrics_period);
    let battery0: f64 = rng.random_range(0.6..1.0);
    let noise = Normal::new(0.0, sim.fps_noise_sd).expect("validated sd");
    while t <= duration_ms {
        let dip = in_incident(IncidentKind::FpsDip, t);
        let u: f64 = rng.random();
        let n: f64 = noise.sample(&mut rng);
        let fps = if dip { (DIP_FPS + n).clamp(0.0, sim.fps_base) } else { (sim.fps_base - n.abs()).max(0.0) };
        let metrics = DeviceMetrics {
            fps,
            battery: (battery0 - sim.battery_drain * t as f64 / 1000.0).clamp(0.0, 1.0),
            cpu: if dip { 0.9 + 0.1 * u } else { 0.3 + 0.15 * u },
            gpu: if dip { 0.95 + 0.05 * u } else { 0.5 + 0.2 * u },
            net_in_bps: 2.0e6 * (0.5 + u),
            net_out_bps: 4.0e5 * (0.5 + u),
            latency_ms: if dip { 80.0 + 80.0 * u } else { 15.0 + 30.0 * u },
        };
        items.push((t, Pending::Metrics(metrics)));
        t += metrics_period;
    }

    // rendered-view stubs
    if sim.view_hz > 0.0 {
        let view_period = period_ms(sim.view_hz);
        let mut t = rng.random_range(0..view_period);
        while t <= duration_ms {
            items.push((t, Pending::View(view_pattern(index, t))));
            t += view_period;
        }
    }

    // calibrations at the nearest station
    if sim.calibration_rate > 0.0 && !scene.stations.is_empty() {
        let gaps = Exp::new(sim.calibration_rate / 60_000.0).expect("validated rate");
        let mut t = gaps.sample(&mut rng);
        while t <= duration_ms as f64 {
            let tm = t.round() as Millis;
            let here = position_at(tm);
            let station = scene
                .stations
                .iter()
                .min_by(|a, b| {
                    here.horizontal()
                        .distance(a.position.horizontal())
                        .total_cmp(&here.horizontal().distance(b.position.horizontal()))
                })
                .map(|s| s.id.clone());
            items.push((tm, Pending::Event(EventKind::Calibration, station)));
            t += gaps.sample(&mut rng);
        }
    }

    for inc in &incidents {
        if inc.kind == IncidentKind::TrackingLoss {
            let (a, b) = inc.window_ms();
            items.push((a, Pending::Event(EventKind::TrackingLost, None)));
            items.push((b, Pending::Event(EventKind::TrackingRecovered, None)));
        }
    }

    let hb_times: Vec<Millis> = (0..=duration_ms / sim.heartbeat_ms).map(|k| k * sim.heartbeat_ms).collect();
    let offline: Vec<(Millis, Millis)> =
        incidents.iter().filter(|i| i.kind == IncidentKind::Offline).map(|i| i.window_ms()).collect();

    let mut messages = vec![ClientMessage::Hello { id: id.clone(), role: Role::Visitor, model: "sim".into() }];
    for (t, item) in assign_times(items, hb_times) {
        if offline.iter().any(|&(a, b)| t > a && t <= b) {
            continue;
        }
        messages.push(match item {
            None => ClientMessage::Heartbeat { t, id: id.clone() },
            Some(Pending::Pose { head, hands }) => {
                let (left, right) = match hands {
                    Some((l, r)) => (Some(l), Some(r)),
                    None => (None, None),
                };
                ClientMessage::Pose { t, id: id.clone(), head, left, right }
            }
            Some(Pending::Metrics(metrics)) => ClientMessage::Metrics { t, id: id.clone(), metrics },
            Some(Pending::Event(kind, station)) => ClientMessage::Event { t, id: id.clone(), kind, station },
            Some(Pending::View(data)) => {
                ClientMessage::View { t, id: id.clone(), w: VIEW_SIZE, h: VIEW_SIZE, fmt: FrameFormat::Rgb8, data }
            }
        });
    }
    DeviceStream { id, messages }
}

/// Gives every item a strictly increasing timestamp. Heartbeats keep their
/// exact grid times; other items that collide are pushed forward by 1 ms.
/// `None` marks a heartbeat in the output.
fn assign_times(mut items: Vec<(Millis, Pending)>, hb_times: Vec<Millis>) -> Vec<(Millis, Option<Pending>)> {
    items.sort_by_key(|(t, _)| *t);
    let mut hbs: VecDeque<Millis> = hb_times.into();
    let mut out = Vec::with_capacity(items.len() + hbs.len());
    let mut next_free: Millis = 0;
    for (t, item) in items {
        let mut cand = t.max(next_free);
        while let Some(&h) = hbs.front() {
            if h > cand {
                break;
            }
            out.push((h, None));
            hbs.pop_front();
            next_free = h + 1;
            cand = cand.max(next_free);
        }
        out.push((cand, Some(item)));
        next_free = cand + 1;
    }
    out.extend(hbs.into_iter().map(|h| (h, None)));
    out
}

fn host_stream(scene: &SceneConfig, sim: &SimConfig, duration_ms: Millis) -> DeviceStream {
    let id = HOST_ID.to_string();
    let floor = scene.floors.iter().copied().fold(f64::INFINITY, f64::min);
    let center = scene.bounds.center().with_y(floor + EYE_HEIGHT);
    let mut messages = vec![ClientMessage::Hello { id: id.clone(), role: Role::Host, model: "sim".into() }];
    let pose_period = period_ms(sim.pose_hz.min(10.0));
    let mut items: Vec<(Millis, Pending)> = Vec::new();
    let mut t = 1;
    while t <= duration_ms {
        // slow look-around, 10°/s
        let yaw = (10.0 * t as f64 / 1000.0).to_radians();
        items.push((t, Pending::Pose { head: Pose::new(center, Quat::from_yaw(yaw)), hands: None }));
        t += pose_period;
    }
    let hb_times = (0..=duration_ms / sim.heartbeat_ms).map(|k| k * sim.heartbeat_ms).collect();
    for (t, item) in assign_times(items, hb_times) {
        messages.push(match item {
            Some(Pending::Pose { head, .. }) => {
                ClientMessage::Pose { t, id: id.clone(), head, left: None, right: None }
            }
            _ => ClientMessage::Heartbeat { t, id: id.clone() },
        });
    }
    DeviceStream { id, messages }
}

/// 26 joints around a point in front of and below the head.
fn hand_frame(head: &Pose, left: bool, tracked: bool) -> HandFrame {
    if !tracked {
        return HandFrame::untracked();
    }
    let side = if left { -1.0 } else { 1.0 };
    let center = head.transform_point(Vec3::new(0.2 * side, -0.45, -0.3));
    let mut local = Vec::with_capacity(HAND_JOINTS);
    local.push(Vec3::ZERO); // palm
    local.push(Vec3::new(0.0, 0.0, 0.08)); // wrist
    for k in 1..=4 {
        local.push(Vec3::new(-0.03 * side * k as f64, 0.0, 0.02 - 0.02 * k as f64));
    }
    for finger in 0..4 {
        let x = side * (0.025 * finger as f64 - 0.03);
        for k in 0..5 {
            local.push(Vec3::new(x, 0.0, -0.04 - 0.022 * k as f64));
        }
    }
    debug_assert_eq!(local.len(), HAND_JOINTS);
    let joints = local.into_iter().map(|l| Pose::new(center + head.orientation.rotate(l), head.orientation)).collect();
    HandFrame { tracked: true, joints }
}

/// Moving diagonal stripes tinted with the visitor's identity color.
fn view_pattern(index: usize, t: Millis) -> Vec<u8> {
    let c = identity_color(index);
    let shift = (t / 100) as usize;
    let mut data = Vec::with_capacity((VIEW_SIZE * VIEW_SIZE * 3) as usize);
    for y in 0..VIEW_SIZE as usize {
        for x in 0..VIEW_SIZE as usize {
            let stripe = if ((x + y + shift) / 8).is_multiple_of(2) { 1.0 } else { 0.35 };
            data.push((c.r * stripe * 255.0) as u8);
            data.push((c.g * stripe * 255.0) as u8);
            data.push((c.b * stripe * 255.0) as u8);
        }
    }
    data
}
