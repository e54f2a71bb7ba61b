//! Deterministic virtual-time replay of a simulated fleet.
//!
//! Messages are delivered when the virtual clock reaches their device
//! timestamp and pass through the wire codec on the way, exactly as over
//! TCP. Every tick runs the heartbeat sweep and builds a snapshot, so a
//! replay reproduces what a live server would emit, minus scheduling noise.

use std::collections::HashMap;

use crate::error::ConfigError;
use crate::exec::ExecMode;
use crate::protocol::{decode, encode, ClientMessage};
use crate::scene::SceneConfig;
use crate::session::{ConnId, Session, SessionConfig, SystemEvent};
use crate::sim::{simulate_with, SimConfig};
use crate::telemetry::Millis;
use crate::viz::{SceneSnapshot, SnapshotBuilder, VizConfig};

pub const DEFAULT_TICK_MS: Millis = 100;

pub struct Replay {
    pub session: Session,
    pub builder: SnapshotBuilder,
    pub scene: SceneConfig,
    pub viz: VizConfig,
    tick_ms: Millis,
    now: Millis,
    queue: Vec<(String, ClientMessage)>,
    cursor: usize,
    conns: HashMap<String, ConnId>,
}

/// What one tick produced.
pub struct TickOutput {
    /// Events from ingestion and the heartbeat sweep, in order.
    pub events: Vec<SystemEvent>,
    pub snapshot: SceneSnapshot,
}

impl Replay {
    pub fn new(
        scene: SceneConfig,
        sim: &SimConfig,
        duration_s: f64,
        session: SessionConfig,
        viz: VizConfig,
        mode: ExecMode,
    ) -> Result<Self, ConfigError> {
        let queue = simulate_with(&scene, sim, duration_s, mode)?;
        Ok(Self::from_messages(scene, queue, session, viz, mode))
    }

    /// Replays an already merged stream; see [`crate::sim::merge_streams`].
    pub fn from_messages(
        scene: SceneConfig,
        queue: Vec<(String, ClientMessage)>,
        session: SessionConfig,
        viz: VizConfig,
        mode: ExecMode,
    ) -> Self {
        Self {
            session: Session::new(session),
            builder: SnapshotBuilder::new(mode),
            scene,
            viz,
            tick_ms: DEFAULT_TICK_MS,
            now: 0,
            queue,
            cursor: 0,
            conns: HashMap::new(),
        }
    }

    pub fn with_tick_ms(mut self, tick_ms: Millis) -> Self {
        self.tick_ms = tick_ms.max(1);
        self
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn finished(&self) -> bool {
        self.cursor >= self.queue.len()
    }

    /// Advances the clock by one tick.
    pub fn step(&mut self) -> TickOutput {
        self.now += self.tick_ms;
        let mut events = Vec::new();
        while let Some((id, msg)) = self.queue.get(self.cursor) {
            let at = msg.t().unwrap_or(0);
            if at > self.now {
                break;
            }
            let next = self.conns.len() as ConnId;
            let conn = *self.conns.entry(id.clone()).or_insert(next);
            match decode(&encode(msg)) {
                Ok(wire) => {
                    if let Ok(evs) = self.session.ingest(conn, wire, at) {
                        events.extend(evs);
                    }
                }
                Err(_) => self.session.note_decode_error(),
            }
            self.cursor += 1;
        }
        events.extend(self.session.heartbeat_sweep(self.now));
        let snapshot = self.builder.build(&self.session, &self.scene, &self.viz, self.now);
        TickOutput { events, snapshot }
    }

    /// Steps until tick number `tick` (1-based) and returns its snapshot.
    pub fn run_to_tick(&mut self, tick: u64) -> SceneSnapshot {
        let mut last = None;
        while self.builder.ticks() < tick {
            last = Some(self.step().snapshot);
        }
        last.unwrap_or_else(|| SceneSnapshot::empty(self.now))
    }
}
