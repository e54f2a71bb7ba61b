//! Waypoint random walk: pick a reachable point, walk to it in a straight
//! line, dwell, repeat. Heads turn toward the walking direction at a
//! bounded rate.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::math::{Pose, Quat, Vec3};
use crate::scene::{SceneConfig, EYE_HEIGHT};

/// Maximum head turn rate, degrees per second.
pub const MAX_TURN_DEG_S: f64 = 90.0;
/// Distance kept from the outer walls when choosing waypoints.
const WALL_MARGIN: f64 = 0.3;
const STAIR_PROBABILITY: f64 = 0.15;
const WAYPOINT_TRIES: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Target {
    point: Vec3,
    stair: bool,
}

#[derive(Debug, Clone)]
pub struct Walker {
    position: Vec3,
    floor: usize,
    yaw: f64,
    pitch_phase: f64,
    target: Option<Target>,
    dwell_s: f64,
}

/// `yaw` such that `Quat::from_yaw(yaw).forward()` points along `dir` (XZ).
fn yaw_toward(dir: Vec3) -> f64 {
    (-dir.x).atan2(-dir.z)
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

impl Walker {
    pub fn spawn<R: Rng>(rng: &mut R, scene: &SceneConfig) -> Self {
        let floor = 0;
        let position = random_point(rng, scene, floor)
            .unwrap_or_else(|| scene.bounds.center().with_y(scene.floors[floor] + EYE_HEIGHT));
        Self {
            position,
            floor,
            yaw: rng.random_range(-PI..PI),
            pitch_phase: rng.random_range(0.0..TAU),
            target: None,
            dwell_s: rng.random_range(0.0..1.0),
        }
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    /// Advances by `dt` seconds and returns the head pose at the new time.
    pub fn step<R: Rng>(&mut self, rng: &mut R, scene: &SceneConfig, speed: f64, dt: f64, t_s: f64) -> Pose {
        let mut desired_yaw = self.yaw;
        if self.dwell_s > 0.0 {
            self.dwell_s -= dt;
        } else {
            if self.target.is_none() {
                self.target = self.pick_target(rng, scene);
                if self.target.is_none() {
                    self.dwell_s = 1.0;
                }
            }
            if let Some(target) = self.target {
                let to = target.point - self.position;
                let remaining = to.length();
                let stride = speed * dt;
                if remaining <= stride {
                    self.position = target.point;
                    self.target = None;
                    self.dwell_s = rng.random_range(0.0..3.0);
                    if target.stair {
                        self.change_floor(rng, scene);
                    }
                } else {
                    self.position += to * (stride / remaining);
                }
                if remaining > 1e-9 {
                    desired_yaw = yaw_toward(to);
                }
            }
        }
        let max_turn = MAX_TURN_DEG_S.to_radians() * dt;
        let delta = wrap_angle(desired_yaw - self.yaw).clamp(-max_turn, max_turn);
        self.yaw = wrap_angle(self.yaw + delta);
        let pitch = 5f64.to_radians() * (0.7 * t_s + self.pitch_phase).sin();
        Pose::new(self.position, Quat::from_yaw_pitch(self.yaw, pitch).normalize())
    }

    fn pick_target<R: Rng>(&self, rng: &mut R, scene: &SceneConfig) -> Option<Target> {
        if scene.floors.len() > 1 && !scene.stairs.is_empty() && rng.random_bool(STAIR_PROBABILITY) {
            let s = scene.stairs[rng.random_range(0..scene.stairs.len())];
            let point = Vec3::new(s[0], self.position.y, s[1]);
            if scene.segment_clear(self.position, point) {
                return Some(Target { point, stair: true });
            }
        }
        for _ in 0..WAYPOINT_TRIES {
            let Some(point) = random_point(rng, scene, self.floor) else {
                break;
            };
            if scene.segment_clear(self.position, point) {
                return Some(Target { point, stair: false });
            }
        }
        None
    }

    fn change_floor<R: Rng>(&mut self, rng: &mut R, scene: &SceneConfig) {
        let n = scene.floors.len();
        if n < 2 {
            return;
        }
        let mut next = rng.random_range(0..n - 1);
        if next >= self.floor {
            next += 1;
        }
        self.floor = next;
        self.position.y = scene.floors[next] + EYE_HEIGHT;
    }
}

/// Uniform head position on `floor`, inside the bounds and off obstacles.
fn random_point<R: Rng>(rng: &mut R, scene: &SceneConfig, floor: usize) -> Option<Vec3> {
    let b = &scene.bounds;
    let mx = WALL_MARGIN.min((b.max.x - b.min.x) / 4.0);
    let mz = WALL_MARGIN.min((b.max.z - b.min.z) / 4.0);
    let y = scene.floors[floor] + EYE_HEIGHT;
    for _ in 0..WAYPOINT_TRIES {
        let p =
            Vec3::new(rng.random_range(b.min.x + mx..b.max.x - mx), y, rng.random_range(b.min.z + mz..b.max.z - mz));
        if !scene.blocked(p) {
            return Some(p);
        }
    }
    None
}
