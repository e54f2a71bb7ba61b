//! Movement/performance history with change-gated decimation and a
//! fading live window.

use serde::{Deserialize, Serialize};

use crate::math::Pose;
use crate::telemetry::Millis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Minimum head displacement (m) that forces a sample to be kept.
    pub eps_pos: f64,
    /// Minimum head rotation (degrees) that forces a sample to be kept.
    pub eps_ang: f64,
    /// Maximum gap (ms) between kept samples.
    pub t_max: Millis,
    /// Length (ms) of the live trail.
    pub window: Millis,
    /// Duration (ms) over which the oldest part of the trail fades out.
    pub alpha_fade: Millis,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { eps_pos: 0.10, eps_ang: 10.0, t_max: 1000, window: 120_000, alpha_fade: 10_000 }
    }
}

impl FilterParams {
    /// Name of the first non-positive parameter.
    pub fn invalid_field(&self) -> Option<&'static str> {
        if !(self.eps_pos.is_finite() && self.eps_pos > 0.0) {
            Some("eps_pos")
        } else if !(self.eps_ang.is_finite() && self.eps_ang > 0.0) {
            Some("eps_ang")
        } else if self.t_max == 0 {
            Some("t_max")
        } else if self.window == 0 {
            Some("window")
        } else if self.alpha_fade == 0 {
            Some("alpha_fade")
        } else {
            None
        }
    }

    /// True when `next` differs enough from `last` to be kept.
    pub fn keeps(&self, last: &TraceSample, next: &TraceSample) -> bool {
        next.pose.position.distance(last.pose.position) >= self.eps_pos
            || last.pose.orientation.angle_to_deg(next.pose.orientation) >= self.eps_ang
            || next.t.saturating_sub(last.t) >= self.t_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: Millis,
    pub pose: Pose,
    /// Frame rate reported most recently before this pose, if any.
    pub fps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSample {
    pub t: Millis,
    pub pose: Pose,
    pub fps: Option<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryTrace {
    kept: Vec<TraceSample>,
    pub params: FilterParams,
}

impl TrajectoryTrace {
    pub fn new(params: FilterParams) -> Self {
        Self { kept: Vec::new(), params }
    }

    /// Offers a sample; returns whether it was kept.
    pub fn offer(&mut self, sample: TraceSample) -> bool {
        let keep = match self.kept.last() {
            None => true,
            Some(last) if sample.t <= last.t => false,
            Some(last) => self.params.keeps(last, &sample),
        };
        if keep {
            self.kept.push(sample);
        }
        keep
    }

    pub fn kept(&self) -> &[TraceSample] {
        &self.kept
    }

    pub fn last(&self) -> Option<&TraceSample> {
        self.kept.last()
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// Cumulative prefix with `t <= up_to_t`.
    pub fn up_to(&self, up_to_t: Millis) -> &[TraceSample] {
        let end = self.kept.partition_point(|s| s.t <= up_to_t);
        &self.kept[..end]
    }

    /// Samples inside the live window ending at `now`.
    pub fn window(&self, now: Millis) -> &[TraceSample] {
        let start = now.saturating_sub(self.params.window);
        let begin = self.kept.partition_point(|s| s.t < start);
        let end = self.kept.partition_point(|s| s.t <= now);
        &self.kept[begin..end]
    }
}

/// Live trail at `now`: samples older than the window are dropped and the
/// oldest `alpha_fade` ms of the window ramp from 0 to 1. The newest
/// sample is always fully opaque.
pub fn truncate_and_alpha(trace: &TrajectoryTrace, now: Millis, params: &FilterParams) -> Vec<AlphaSample> {
    let start = now as i64 - params.window as i64;
    let first = trace.kept.partition_point(|s| (s.t as i64) < start);
    let end = trace.kept.partition_point(|s| s.t <= now);
    let live = &trace.kept[first..end.max(first)];
    let mut out: Vec<AlphaSample> = live
        .iter()
        .map(|s| AlphaSample {
            t: s.t,
            pose: s.pose,
            fps: s.fps,
            alpha: ((s.t as i64 - start) as f64 / params.alpha_fade as f64).clamp(0.0, 1.0),
        })
        .collect();
    if let Some(newest) = out.last_mut() {
        newest.alpha = 1.0;
    }
    out
}
