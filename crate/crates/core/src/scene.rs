//! Physical layout of the venue: bounds, floors, calibration stations,
//! obstacles and stairs.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::math::Vec3;

/// Standing eye height above the floor, meters.
pub const EYE_HEIGHT: f64 = 1.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }

    pub fn center(&self) -> Vec3 {
        self.min.lerp(self.max, 0.5)
    }

    fn is_well_formed(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x < self.max.x
            && self.min.y < self.max.y
            && self.min.z < self.max.z
    }

    /// Whether the horizontal segment `a → b` at height `a.y` touches the box.
    pub fn blocks_segment(&self, a: Vec3, b: Vec3) -> bool {
        if a.y < self.min.y || a.y > self.max.y {
            return false;
        }
        // slab test in XZ
        let mut t0: f64 = 0.0;
        let mut t1: f64 = 1.0;
        for (p, d, lo, hi) in [(a.x, b.x - a.x, self.min.x, self.max.x), (a.z, b.z - a.z, self.min.z, self.max.z)] {
            if d.abs() < 1e-12 {
                if p < lo || p > hi {
                    return false;
                }
            } else {
                let (mut ta, mut tb) = ((lo - p) / d, (hi - p) / d);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Station {
    pub id: String,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub bounds: Aabb,
    /// Floor heights, meters.
    pub floors: Vec<f64>,
    #[serde(default)]
    pub stations: Vec<Station>,
    #[serde(default)]
    pub obstacles: Vec<Aabb>,
    /// XZ positions where visitors may change floors.
    #[serde(default)]
    pub stairs: Vec<[f64; 2]>,
    /// End point of network traffic curves; defaults to 2.5 m above the
    /// middle of the lowest floor.
    #[serde(default)]
    pub server_anchor: Option<Vec3>,
}

impl Default for SceneConfig {
    /// A 30 m × 20 m hall with one floor and two calibration stations.
    fn default() -> Self {
        Self {
            bounds: Aabb::new(Vec3::new(-15.0, 0.0, -10.0), Vec3::new(15.0, 4.0, 10.0)),
            floors: vec![0.0],
            stations: vec![
                Station { id: "s01".into(), position: Vec3::new(-12.0, 0.0, -8.0) },
                Station { id: "s02".into(), position: Vec3::new(12.0, 0.0, 8.0) },
            ],
            obstacles: Vec::new(),
            stairs: Vec::new(),
            server_anchor: None,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.bounds.is_well_formed() {
            return Err(ConfigError::new("scene.bounds", "min must be finite and strictly below max on every axis"));
        }
        if self.floors.is_empty() {
            return Err(ConfigError::new("scene.floors", "at least one floor level is required"));
        }
        for (i, &y) in self.floors.iter().enumerate() {
            if !(y.is_finite() && y >= self.bounds.min.y && y + EYE_HEIGHT <= self.bounds.max.y) {
                return Err(ConfigError::new(
                    format!("scene.floors[{i}]"),
                    format!("floor {y} must lie inside the bounds with {EYE_HEIGHT} m of headroom"),
                ));
            }
        }
        for (i, s) in self.stations.iter().enumerate() {
            if s.id.is_empty() {
                return Err(ConfigError::new(format!("scene.stations[{i}].id"), "must not be empty"));
            }
            if !self.bounds.contains(s.position) {
                return Err(ConfigError::new(format!("scene.stations[{i}].position"), "must lie inside the bounds"));
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !o.is_well_formed() {
                return Err(ConfigError::new(format!("scene.obstacles[{i}]"), "min must be strictly below max"));
            }
        }
        for (i, s) in self.stairs.iter().enumerate() {
            let inside = self.floors.iter().all(|&f| {
                let p = Vec3::new(s[0], f + EYE_HEIGHT, s[1]);
                self.bounds.contains(p) && !self.blocked(p)
            });
            if !inside {
                return Err(ConfigError::new(
                    format!("scene.stairs[{i}]"),
                    "must lie inside the bounds and off obstacles",
                ));
            }
        }
        if let Some(a) = self.server_anchor {
            if !a.is_finite() {
                return Err(ConfigError::new("scene.server_anchor", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn blocked(&self, p: Vec3) -> bool {
        self.obstacles.iter().any(|o| o.contains(p))
    }

    pub fn segment_clear(&self, a: Vec3, b: Vec3) -> bool {
        !self.obstacles.iter().any(|o| o.blocks_segment(a, b))
    }

    /// Height of the floor a head at height `head_y` stands on.
    pub fn floor_under(&self, head_y: f64) -> f64 {
        floor_under(&self.floors, head_y)
    }

    pub fn server_anchor(&self) -> Vec3 {
        self.server_anchor.unwrap_or_else(|| {
            let c = self.bounds.center();
            let lowest = self.floors.iter().copied().fold(f64::INFINITY, f64::min);
            let base = if lowest.is_finite() { lowest } else { self.bounds.min.y };
            Vec3::new(c.x, base + 2.5, c.z)
        })
    }
}

/// Highest floor at or below the feet of a head at `head_y`, falling back to
/// the lowest floor, or to `head_y - EYE_HEIGHT` when no floors are known.
pub fn floor_under(floors: &[f64], head_y: f64) -> f64 {
    let feet = head_y - EYE_HEIGHT;
    let below = floors.iter().copied().filter(|&f| f <= feet + 0.5).fold(f64::NEG_INFINITY, f64::max);
    if below.is_finite() {
        return below;
    }
    let lowest = floors.iter().copied().fold(f64::INFINITY, f64::min);
    if lowest.is_finite() {
        lowest
    } else {
        feet
    }
}
