//! Oracles and generators shared by the test targets of this crate and the
//! acceptance target of the server crate.
#![allow(dead_code)]

pub mod geometry;
pub mod protocol;
pub mod session;

use std::path::PathBuf;

use mrhost_core::exec::ExecMode;
use mrhost_core::protocol::encode_snapshot;
use mrhost_core::replay::Replay;
use mrhost_core::scene::SceneConfig;
use mrhost_core::session::SessionConfig;
use mrhost_core::sim::SimConfig;
use mrhost_core::viz::VizConfig;

pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/seed42_tick300.json")
}

/// Seed 42, 8 visitors, 30 s of virtual time at 100 ms ticks: the encoded
/// snapshot of tick 300.
pub fn golden_run(mode: ExecMode) -> String {
    let sim = SimConfig { seed: 42, n_visitors: 8, ..SimConfig::default() };
    let mut r = Replay::new(SceneConfig::default(), &sim, 30.0, SessionConfig::default(), VizConfig::default(), mode)
        .expect("valid golden config");
    encode_snapshot(&r.run_to_tick(300))
}
