use std::collections::HashMap;

use mrhost_core::exec::ExecMode;
use mrhost_core::math::{Pose, Quat, Vec3};
use mrhost_core::protocol::ClientMessage;
use mrhost_core::replay::Replay;
use mrhost_core::scene::SceneConfig;
use mrhost_core::session::{
    truncate_and_alpha, FilterParams, Session, SessionConfig, SystemEvent, SystemEventKind, TraceSample,
    TrajectoryTrace,
};
use mrhost_core::sim::{simulate, Incident, IncidentKind, SimConfig};
use mrhost_core::viz::VizConfig;

pub fn dropout_sim() -> SimConfig {
    SimConfig {
        seed: 42,
        n_visitors: 3,
        heartbeat_ms: 500,
        scripted_incidents: vec![Incident {
            t_start: 10.0,
            duration: 5.0,
            visitor: "v02".into(),
            kind: IncidentKind::Offline,
        }],
        ..SimConfig::default()
    }
}

/// Every event of a 25 s replay of [`dropout_sim`] at 100 ms ticks with the
/// 1500 ms timeout.
pub fn dropout_events() -> Vec<SystemEvent> {
    let session = SessionConfig { heartbeat_timeout_ms: 1500, ..SessionConfig::default() };
    let mut r =
        Replay::new(SceneConfig::default(), &dropout_sim(), 25.0, session, VizConfig::none(), ExecMode::Sequential)
            .unwrap()
            .with_tick_ms(100);
    let mut events = Vec::new();
    while r.now() < 25_000 {
        events.extend(r.step().events);
    }
    events
}

/// Offline detected in (11.5 s, 11.6 s], back online within one tick of the
/// first message after the dropout, identical on a second run.
pub fn offline_detection() -> Result<String, String> {
    let events = dropout_events();
    let conn: Vec<&SystemEvent> = events
        .iter()
        .filter(|e| matches!(e.kind, SystemEventKind::WentOffline { .. } | SystemEventKind::CameOnline))
        .collect();
    if conn.len() != 2 || conn[0].visitor_id != "v02" || conn[1].visitor_id != "v02" {
        return Err(format!("expected one offline/online pair for v02, got {conn:?}"));
    }
    let (off, on) = (conn[0], conn[1]);
    if !matches!(off.kind, SystemEventKind::WentOffline { last_position: Some(_) }) {
        return Err(format!("first event should be went_offline with a position: {off:?}"));
    }
    if !(off.t > 11_500 && off.t <= 11_600) {
        return Err(format!("went_offline at {} ms, outside (11500, 11600]", off.t));
    }
    let resumed = simulate(&SceneConfig::default(), &dropout_sim(), 25.0)
        .unwrap()
        .iter()
        .filter(|(id, _)| id == "v02")
        .filter_map(|(_, m)| m.t())
        .find(|&t| t > 10_000)
        .ok_or("v02 never resumed")?;
    if !matches!(on.kind, SystemEventKind::CameOnline) || on.t < resumed || on.t > resumed + 100 {
        return Err(format!("came_online at {} ms, resumption at {resumed} ms", on.t));
    }
    if events != dropout_events() {
        return Err("second run produced different events".into());
    }
    Ok(format!("went_offline t={} ms, came_online t={} ms (resumed {resumed} ms)", off.t, on.t))
}

/// Angle between two rotations, computed from the quaternion dot product.
pub fn oracle_angle_deg(a: Quat, b: Quat) -> f64 {
    let d = (a.x * b.x + a.y * b.y + a.z * b.z + a.w * b.w).abs().min(1.0);
    2.0 * d.acos().to_degrees()
}

pub fn oracle_keeps(p: &FilterParams, last: &TraceSample, next: &TraceSample) -> bool {
    let dp = next.pose.position - last.pose.position;
    let dist = (dp.x * dp.x + dp.y * dp.y + dp.z * dp.z).sqrt();
    dist >= p.eps_pos
        || oracle_angle_deg(last.pose.orientation, next.pose.orientation) >= p.eps_ang
        || next.t - last.t >= p.t_max
}

/// Ingests a seeded run and compares every visitor's kept set against a
/// brute-force replay of the keep predicate; also checks each dropped
/// sample is within every threshold of its kept predecessor.
pub fn kept_sets_match_oracle(seed: u64, n_visitors: usize, seconds: f64) -> Result<String, String> {
    let sim = SimConfig { seed, n_visitors, pose_hz: 20.0, ..SimConfig::default() };
    let msgs = simulate(&SceneConfig::default(), &sim, seconds).map_err(|e| e.to_string())?;
    let params = FilterParams::default();

    let mut s = Session::default();
    let mut conns: HashMap<String, u64> = HashMap::new();
    let mut raw: HashMap<String, Vec<(u64, Pose)>> = HashMap::new();
    for (id, m) in &msgs {
        let n = conns.len() as u64;
        let conn = *conns.entry(id.clone()).or_insert(n);
        if let ClientMessage::Pose { t, head, .. } = m {
            raw.entry(id.clone()).or_default().push((*t, *head));
        }
        s.ingest(conn, m.clone(), m.t().unwrap_or(0)).map_err(|e| e.to_string())?;
    }
    if raw.len() != n_visitors {
        return Err(format!("{} visitors sent poses, expected {n_visitors}", raw.len()));
    }

    let (mut total, mut kept_total) = (0, 0);
    for (id, poses) in &raw {
        let mut kept: Vec<TraceSample> = Vec::new();
        for &(t, pose) in poses {
            let sample = TraceSample { t, pose, fps: None };
            match kept.last() {
                None => kept.push(sample),
                Some(last) if t > last.t && oracle_keeps(&params, last, &sample) => kept.push(sample),
                Some(last) => {
                    let d = last.pose.position.distance(pose.position);
                    let a = oracle_angle_deg(last.pose.orientation, pose.orientation);
                    if d >= params.eps_pos || a >= params.eps_ang || t - last.t >= params.t_max {
                        return Err(format!("{id}: dropped sample at {t} is {d} m / {a} deg / {} ms away", t - last.t));
                    }
                }
            }
        }
        let got: Vec<(u64, Pose)> = s.visitor(id).unwrap().history.kept().iter().map(|k| (k.t, k.pose)).collect();
        let want: Vec<(u64, Pose)> = kept.iter().map(|k| (k.t, k.pose)).collect();
        if got != want {
            let at = got.iter().zip(&want).position(|(a, b)| a != b).unwrap_or(got.len().min(want.len()));
            return Err(format!("{id}: kept sets differ at index {at} ({} vs {} samples)", got.len(), want.len()));
        }
        total += poses.len();
        kept_total += got.len();
    }
    Ok(format!("{n_visitors} visitors, {total} poses, {kept_total} kept, exact match"))
}

/// Closed-form alpha at the window boundary, mid-fade and the newest sample,
/// with everything older than the window gone.
pub fn alpha_closed_form() -> Result<String, String> {
    let params = FilterParams::default();
    let now = 200_000;
    let boundary = now - params.window;
    let fade_end = boundary + params.alpha_fade;
    let mid = boundary + params.alpha_fade / 2;
    let mut trace = TrajectoryTrace::new(FilterParams { t_max: 1, ..params });
    let times = [boundary - 10_000, boundary - 1, boundary, mid, fade_end, 150_000, 199_000];
    for t in times {
        trace.offer(TraceSample { t, pose: Pose::at(Vec3::X * (t as f64)), fps: None });
    }
    let out = truncate_and_alpha(&trace, now, &params);
    let alpha: HashMap<u64, f64> = out.iter().map(|s| (s.t, s.alpha)).collect();
    let expect = |t: u64, want: f64, tol: f64| -> Result<(), String> {
        match alpha.get(&t) {
            Some(a) if (a - want).abs() <= tol => Ok(()),
            got => Err(format!("alpha at t={t}: {got:?}, expected {want}")),
        }
    };
    if alpha.contains_key(&(boundary - 10_000)) || alpha.contains_key(&(boundary - 1)) {
        return Err("samples older than the window survived".into());
    }
    expect(boundary, 0.0, 0.0)?;
    expect(mid, 0.5, 1e-12)?;
    expect(fade_end, 1.0, 0.0)?;
    expect(199_000, 1.0, 0.0)?;

    let mut lone = TrajectoryTrace::new(params);
    lone.offer(TraceSample { t: boundary + 1000, pose: Pose::default(), fps: None });
    let out = truncate_and_alpha(&lone, now, &params);
    if out.len() != 1 || out[0].alpha != 1.0 {
        return Err(format!("newest sample inside the fade should be opaque: {out:?}"));
    }
    Ok("boundary 0, mid-fade 0.5, newest 1.0, expired samples dropped".into())
}
