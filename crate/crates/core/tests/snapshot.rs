mod support;

use std::path::PathBuf;

use mrhost_core::exec::ExecMode;
use mrhost_core::math::{Pose, Vec3};
use mrhost_core::protocol::{
    encode_control, encode_error, encode_history, encode_snapshot, ControlMessage, HistoryReply,
};
use mrhost_core::replay::Replay;
use mrhost_core::scene::SceneConfig;
use mrhost_core::session::SessionConfig;
use mrhost_core::sim::{Incident, IncidentKind, SimConfig};
use mrhost_core::viz::{GridMode, Layer, Level, Placement, SceneSnapshot, VizConfig, VizConfigPatch};
use serde_json::Value;

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schema").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, text: &str) {
    let value: Value = serde_json::from_str(text).unwrap();
    let errors: Vec<String> = v.iter_errors(&value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn eventful_sim(seed: u64, n: usize) -> SimConfig {
    SimConfig {
        seed,
        n_visitors: n,
        calibration_rate: 3.0,
        include_host: false,
        scripted_incidents: vec![
            Incident { t_start: 1.0, duration: 3.5, visitor: "v01".into(), kind: IncidentKind::Offline },
            Incident { t_start: 1.5, duration: 3.0, visitor: "v02".into(), kind: IncidentKind::TrackingLoss },
            Incident { t_start: 0.5, duration: 2.5, visitor: "v03".into(), kind: IncidentKind::FpsDip },
        ],
        ..SimConfig::default()
    }
}

fn replay(sim: &SimConfig, seconds: f64, viz: VizConfig, mode: ExecMode) -> Replay {
    Replay::new(SceneConfig::default(), sim, seconds, SessionConfig::default(), viz, mode).unwrap()
}

#[test]
fn empty_snapshot_is_minimal() {
    assert_eq!(encode_snapshot(&SceneSnapshot::empty(0)), r#"{"t":0,"visitors":[],"primitives":[]}"#);
    assert_valid(&schema("snapshot.schema.json"), &encode_snapshot(&SceneSnapshot::empty(0)));
}

#[test]
fn every_layout_validates_against_the_schema() {
    let v = schema("snapshot.schema.json");
    let variants = [
        VizConfig::default(),
        VizConfig { placement: Placement::HostCentric, ..VizConfig::default() },
        VizConfig { placement: Placement::HostCentric, level: Level::Floor, ..VizConfig::default() },
        VizConfig { placement: Placement::HostCentric, grid_mode: GridMode::ForceGrid, ..VizConfig::default() },
        VizConfig { flatten_links: true, ..VizConfig::default() },
    ];
    let mut layers_seen = std::collections::BTreeSet::new();
    for viz in variants {
        let mut r = replay(&eventful_sim(4, 6), 12.0, viz, ExecMode::Parallel);
        for tick in [5, 40, 60, 120] {
            let snap = r.run_to_tick(tick);
            layers_seen.extend(snap.primitives.iter().map(|d| d.layer));
            assert_valid(&v, &encode_snapshot(&snap));
        }
    }
    assert_eq!(layers_seen.len(), Layer::ALL.len(), "{layers_seen:?}");
}

#[test]
fn replies_and_controls_validate() {
    let reply = schema("reply.schema.json");
    let control = schema("control.schema.json");
    let mut r = replay(&eventful_sim(2, 3), 10.0, VizConfig::none(), ExecMode::Sequential);
    r.run_to_tick(100);
    let samples = r.session.get_history("v03", u64::MAX).unwrap().to_vec();
    assert!(!samples.is_empty());
    assert_valid(&reply, &encode_history(&HistoryReply { visitor: "v03".into(), up_to_t: None, samples }));
    assert_valid(&reply, &encode_history(&HistoryReply { visitor: "v03".into(), up_to_t: Some(0), samples: vec![] }));
    assert_valid(&reply, &encode_error("unknown visitor `x`"));

    let full = serde_json::to_value(VizConfig::default()).unwrap();
    let all: VizConfigPatch = serde_json::from_value(full).unwrap();
    for m in [
        ControlMessage::SetVizConfig { patch: all },
        ControlMessage::SetVizConfig { patch: VizConfigPatch { area: Some(false), ..Default::default() } },
        ControlMessage::RequestHistory { visitor_id: "v01".into(), up_to_t: Some(5) },
        ControlMessage::RequestHistory { visitor_id: "v01".into(), up_to_t: None },
        ControlMessage::SetHostPose { pose: Pose::at(Vec3::new(1.0, 1.7, 2.0)) },
        ControlMessage::SetTrailWindow { window_ms: 30_000 },
    ] {
        assert_valid(&control, &encode_control(&m));
    }
}

#[test]
fn parallel_and_sequential_snapshots_are_identical() {
    let sim = eventful_sim(17, 12);
    let mut a = replay(&sim, 20.0, VizConfig::default(), ExecMode::Parallel);
    let mut b = replay(&sim, 20.0, VizConfig::default(), ExecMode::Sequential);
    for _ in 0..200 {
        assert_eq!(encode_snapshot(&a.step().snapshot), encode_snapshot(&b.step().snapshot));
    }
}

#[test]
fn disabled_layers_are_absent() {
    let mut r = replay(&eventful_sim(3, 4), 5.0, VizConfig::default(), ExecMode::Sequential);
    assert!(r.run_to_tick(30).area().is_some());
    r.viz = r.viz.apply(&VizConfigPatch { area: Some(false), trajectory: Some(false), ..Default::default() }).unwrap();
    let snap = r.run_to_tick(31);
    assert!(snap.area().is_none());
    assert_eq!(snap.layer(Layer::Trajectory).count(), 0);
    assert!(snap.layer(Layer::Arrow).count() > 0);
}

#[test]
fn primitives_are_ordered_by_layer_then_visitor() {
    let mut r = replay(&eventful_sim(5, 8), 5.0, VizConfig::default(), ExecMode::Parallel);
    let snap = r.run_to_tick(40);
    let keys: Vec<(Layer, Option<String>)> = snap.primitives.iter().map(|d| (d.layer, d.subject.clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

/// Regenerate with `UPDATE_GOLDEN=1 cargo test -p mrhost-core --test snapshot golden`.
#[test]
fn golden_snapshot_tick_300() {
    let path = support::golden_path();
    let first = support::golden_run(ExecMode::Parallel);
    assert_eq!(first, support::golden_run(ExecMode::Sequential));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &first).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden file is committed");
    assert_eq!(first, golden.trim_end());
}
