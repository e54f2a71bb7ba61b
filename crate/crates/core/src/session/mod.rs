//! Authoritative per-visitor state.
//!
//! The [`Session`] ingests decoded client messages, runs the heartbeat
//! failure detector, counts calibrations per station and feeds every head
//! pose through the trajectory decimation filter.

mod record;
mod trace;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use record::Recorder;
pub use trace::{truncate_and_alpha, AlphaSample, FilterParams, TraceSample, TrajectoryTrace};

use crate::math::{Pose, Vec3};
use crate::protocol::{ClientMessage, EventKind, FrameFormat, ViewFrame};
use crate::telemetry::{DeviceMetrics, HandFrame, Millis, Role, TelemetrySample};

/// Identifies one transport connection.
pub type ConnId = u64;

pub const DEFAULT_HEARTBEAT_TIMEOUT_MS: Millis = 1500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("message for `{0}` arrived before a hello on this connection")]
    UnknownVisitor(String),
    #[error("stale sample from `{id}`: t={t} is older than {latest}")]
    StaleTimestamp { id: String, t: Millis, latest: Millis },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown visitor `{0}`")]
pub struct UnknownVisitor(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Connection {
    Online,
    Offline { since: Millis, last_position: Option<Vec3> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Tracking {
    Ok,
    Lost { since: Millis, position: Option<Vec3> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemEventKind {
    WentOffline { last_position: Option<Vec3> },
    CameOnline,
    TrackingLost { position: Option<Vec3> },
    TrackingRecovered,
    Calibration { station: String, cumulative_count: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemEvent {
    pub t: Millis,
    pub visitor_id: String,
    #[serde(flatten)]
    pub kind: SystemEventKind,
}

/// Most recent rendered-view frame received from a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRef {
    pub id: String,
    pub w: u32,
    pub h: u32,
    pub fmt: FrameFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitorState {
    pub id: String,
    pub role: Role,
    pub model: String,
    /// Order of first appearance; selects the identity color.
    pub join_index: usize,
    pub connection: Connection,
    pub tracking: Tracking,
    /// Device clock of the newest accepted message.
    pub last_t: Option<Millis>,
    /// Server clock when the newest message arrived.
    pub last_seen: Millis,
    pub head: Option<Pose>,
    pub head_t: Millis,
    pub left: Option<HandFrame>,
    pub right: Option<HandFrame>,
    pub metrics: Option<DeviceMetrics>,
    pub history: TrajectoryTrace,
    pub calibration_count_by_station: BTreeMap<String, u64>,
    pub latest_view: Option<ViewRef>,
    /// Pixels of `latest_view`.
    pub latest_view_data: Vec<u8>,
}

impl VisitorState {
    fn new(id: String, role: Role, model: String, join_index: usize, now: Millis, filter: FilterParams) -> Self {
        Self {
            id,
            role,
            model,
            join_index,
            connection: Connection::Online,
            tracking: Tracking::Ok,
            last_t: None,
            last_seen: now,
            head: None,
            head_t: 0,
            left: None,
            right: None,
            metrics: None,
            history: TrajectoryTrace::new(filter),
            calibration_count_by_station: BTreeMap::new(),
            latest_view: None,
            latest_view_data: Vec::new(),
        }
    }

    pub fn is_online(&self) -> bool {
        self.connection == Connection::Online
    }

    pub fn position(&self) -> Option<Vec3> {
        self.head.map(|p| p.position)
    }

    pub fn fps(&self) -> Option<f64> {
        self.metrics.map(|m| m.fps)
    }

    /// Merged view of the newest pose, hands and metrics.
    pub fn latest(&self) -> Option<TelemetrySample> {
        self.head.map(|head| TelemetrySample {
            t: self.head_t,
            head,
            left: self.left.clone(),
            right: self.right.clone(),
            metrics: self.metrics,
        })
    }

    /// Server time `now` translated to this device's clock.
    pub fn device_clock_at(&self, now: Millis) -> Millis {
        match self.last_t {
            Some(t) => t + now.saturating_sub(self.last_seen),
            None => now,
        }
    }

    /// The offline transition as an event, while the visitor is offline.
    pub fn offline_event(&self) -> Option<SystemEvent> {
        match self.connection {
            Connection::Offline { since, last_position } => Some(SystemEvent {
                t: since,
                visitor_id: self.id.clone(),
                kind: SystemEventKind::WentOffline { last_position },
            }),
            Connection::Online => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub heartbeat_timeout_ms: Millis,
    pub filter: FilterParams,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { heartbeat_timeout_ms: DEFAULT_HEARTBEAT_TIMEOUT_MS, filter: FilterParams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub connected: u64,
    pub stale_samples: u64,
    pub decode_errors: u64,
    pub unknown_visitor: u64,
}

#[derive(Debug, Default)]
pub struct Session {
    config: SessionConfig,
    visitors: BTreeMap<String, VisitorState>,
    connections: HashMap<ConnId, String>,
    next_join: usize,
    diagnostics: Diagnostics,
    recorder: Option<Recorder>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        Self { config, ..Self::default() }
    }

    pub fn with_recorder(mut self, recorder: Recorder) -> Self {
        self.recorder = Some(recorder);
        self
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Changes trajectory parameters for every visitor. Kept samples stay.
    pub fn set_filter(&mut self, filter: FilterParams) {
        self.config.filter = filter;
        for v in self.visitors.values_mut() {
            v.history.params = filter;
        }
    }

    pub fn visitors(&self) -> impl Iterator<Item = &VisitorState> {
        self.visitors.values()
    }

    pub fn visitor(&self, id: &str) -> Option<&VisitorState> {
        self.visitors.get(id)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics { connected: self.connections.len() as u64, ..self.diagnostics }
    }

    pub fn note_decode_error(&mut self) {
        self.diagnostics.decode_errors += 1;
    }

    /// Applies one message received on `conn` at server time `received_at`.
    pub fn ingest(
        &mut self,
        conn: ConnId,
        msg: ClientMessage,
        received_at: Millis,
    ) -> Result<Vec<SystemEvent>, IngestError> {
        let mut events = Vec::new();
        if let ClientMessage::Hello { id, role, model } = msg {
            self.connections.insert(conn, id.clone());
            match self.visitors.get_mut(&id) {
                Some(v) => {
                    v.role = role;
                    v.model = model;
                    v.last_seen = received_at;
                    if !v.is_online() {
                        v.connection = Connection::Online;
                        events.push(SystemEvent { t: received_at, visitor_id: id, kind: SystemEventKind::CameOnline });
                    }
                }
                None => {
                    let join = self.next_join;
                    self.next_join += 1;
                    let state = VisitorState::new(id.clone(), role, model, join, received_at, self.config.filter);
                    self.visitors.insert(id, state);
                }
            }
            self.record_events(&events);
            return Ok(events);
        }

        let id = msg.id();
        let bound = self.connections.get(&conn);
        if bound.map(String::as_str) != Some(id) {
            self.diagnostics.unknown_visitor += 1;
            return Err(IngestError::UnknownVisitor(id.to_string()));
        }
        let v = self.visitors.get_mut(id).expect("bound connections always have visitor state");
        let t = msg.t().expect("non-hello messages carry a timestamp");
        if let Some(latest) = v.last_t {
            if t < latest {
                self.diagnostics.stale_samples += 1;
                return Err(IngestError::StaleTimestamp { id: id.to_string(), t, latest });
            }
        }

        v.last_t = Some(t);
        v.last_seen = received_at;
        if !v.is_online() {
            v.connection = Connection::Online;
            events.push(SystemEvent { t: received_at, visitor_id: v.id.clone(), kind: SystemEventKind::CameOnline });
        }

        match msg {
            ClientMessage::Hello { .. } | ClientMessage::Heartbeat { .. } => {}
            ClientMessage::Pose { head, left, right, .. } => {
                v.head = Some(head);
                v.head_t = t;
                if left.is_some() {
                    v.left = left;
                }
                if right.is_some() {
                    v.right = right;
                }
                let sample = TraceSample { t, pose: head, fps: v.fps() };
                if v.history.offer(sample) {
                    if let Some(rec) = self.recorder.as_mut() {
                        rec.sample(&v.id, &sample);
                    }
                }
            }
            ClientMessage::Metrics { metrics, .. } => v.metrics = Some(metrics),
            ClientMessage::Event { kind, station, .. } => match kind {
                EventKind::Calibration => {
                    let station = station.unwrap_or_default();
                    let count = v.calibration_count_by_station.entry(station.clone()).or_insert(0);
                    *count += 1;
                    events.push(SystemEvent {
                        t: received_at,
                        visitor_id: v.id.clone(),
                        kind: SystemEventKind::Calibration { station, cumulative_count: *count },
                    });
                }
                EventKind::TrackingLost => {
                    if v.tracking == Tracking::Ok {
                        let position = v.position();
                        v.tracking = Tracking::Lost { since: received_at, position };
                        events.push(SystemEvent {
                            t: received_at,
                            visitor_id: v.id.clone(),
                            kind: SystemEventKind::TrackingLost { position },
                        });
                    }
                }
                EventKind::TrackingRecovered => {
                    if v.tracking != Tracking::Ok {
                        v.tracking = Tracking::Ok;
                        events.push(SystemEvent {
                            t: received_at,
                            visitor_id: v.id.clone(),
                            kind: SystemEventKind::TrackingRecovered,
                        });
                    }
                }
            },
            ClientMessage::View { id, w, h, fmt, data, .. } => {
                v.latest_view = Some(ViewRef { id: format!("{id}@{t}"), w, h, fmt });
                v.latest_view_data = data;
            }
        }
        self.record_events(&events);
        Ok(events)
    }

    /// Newest frame of the visitor named by a texture reference
    /// (`<visitor>@<t>`). Superseded references resolve to the newer frame.
    pub fn view_frame(&self, texture_ref: &str) -> Option<ViewFrame> {
        let visitor = texture_ref.rsplit_once('@').map_or(texture_ref, |(v, _)| v);
        let v = self.visitor(visitor)?;
        let r = v.latest_view.as_ref()?;
        Some(ViewFrame { id: r.id.clone(), w: r.w, h: r.h, fmt: r.fmt, data: v.latest_view_data.clone() })
    }

    /// Forgets the connection binding; liveness is left to the sweep.
    pub fn disconnect(&mut self, conn: ConnId) {
        self.connections.remove(&conn);
    }

    /// Marks every online visitor silent for longer than the timeout as
    /// offline.
    pub fn heartbeat_sweep(&mut self, now: Millis) -> Vec<SystemEvent> {
        let timeout = self.config.heartbeat_timeout_ms;
        let mut events = Vec::new();
        for v in self.visitors.values_mut() {
            if v.is_online() && now.saturating_sub(v.last_seen) > timeout {
                let last_position = v.position();
                v.connection = Connection::Offline { since: now, last_position };
                events.push(SystemEvent {
                    t: now,
                    visitor_id: v.id.clone(),
                    kind: SystemEventKind::WentOffline { last_position },
                });
            }
        }
        self.record_events(&events);
        if let Some(rec) = self.recorder.as_mut() {
            rec.flush();
        }
        events
    }

    /// Every kept sample with `t <= up_to_t`, regardless of the live window.
    pub fn get_history(&self, visitor_id: &str, up_to_t: Millis) -> Result<&[TraceSample], UnknownVisitor> {
        self.visitors
            .get(visitor_id)
            .map(|v| v.history.up_to(up_to_t))
            .ok_or_else(|| UnknownVisitor(visitor_id.to_string()))
    }

    /// Calibration totals per station over all visitors.
    pub fn calibration_totals(&self) -> BTreeMap<String, u64> {
        let mut totals = BTreeMap::new();
        for v in self.visitors.values() {
            for (station, n) in &v.calibration_count_by_station {
                *totals.entry(station.clone()).or_insert(0) += n;
            }
        }
        totals
    }

    /// Pushes buffered recording output to disk.
    pub fn flush_recording(&mut self) {
        if let Some(rec) = self.recorder.as_mut() {
            rec.flush();
        }
    }

    fn record_events(&mut self, events: &[SystemEvent]) {
        if let Some(rec) = self.recorder.as_mut() {
            for e in events {
                rec.event(e);
            }
        }
    }
}
