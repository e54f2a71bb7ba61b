//! Minimal vector/quaternion algebra for poses and geometry.
//!
//! Coordinates are meters in a right-handed frame with +Y up. A pose with the
//! identity orientation looks down −Z, with +X to its right.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    /// Forward direction of an identity-oriented pose.
    pub const FORWARD: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).length()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn try_normalize(self) -> Option<Vec3> {
        let len = self.length();
        if len > 1e-9 && len.is_finite() {
            Some(self * (1.0 / len))
        } else {
            None
        }
    }

    pub fn normalize_or(self, fallback: Vec3) -> Vec3 {
        self.try_normalize().unwrap_or(fallback)
    }

    pub fn lerp(self, o: Vec3, u: f64) -> Vec3 {
        self + (o - self) * u
    }

    /// Projection onto the horizontal (XZ) plane.
    pub fn horizontal(self) -> Vec3 {
        Vec3::new(self.x, 0.0, self.z)
    }

    pub fn with_y(self, y: f64) -> Vec3 {
        Vec3::new(self.x, y, self.z)
    }

    /// Angle between two directions, in degrees. Zero if either is degenerate.
    pub fn angle_deg(self, o: Vec3) -> f64 {
        let c = self.cross(o).length();
        let d = self.dot(o);
        if c == 0.0 && d == 0.0 {
            return 0.0;
        }
        c.atan2(d).to_degrees()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation quaternion, `w` is the scalar part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl From<[f64; 4]> for Quat {
    fn from(a: [f64; 4]) -> Self {
        Quat::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        [q.x, q.y, q.z, q.w]
    }
}

/// Tolerance on `|q| - 1` for a quaternion to count as a rotation.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

impl Quat {
    pub const IDENTITY: Quat = Quat::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        Self { x, y, z, w }
    }

    pub fn from_axis_angle(axis: Vec3, radians: f64) -> Quat {
        let axis = axis.normalize_or(Vec3::UP);
        let (s, c) = (radians * 0.5).sin_cos();
        Quat::new(axis.x * s, axis.y * s, axis.z * s, c)
    }

    /// Rotation about +Y. Positive yaw turns the forward vector toward −X.
    pub fn from_yaw(radians: f64) -> Quat {
        Quat::from_axis_angle(Vec3::UP, radians)
    }

    /// Yaw about +Y followed by pitch about the local +X axis.
    pub fn from_yaw_pitch(yaw: f64, pitch: f64) -> Quat {
        Quat::from_yaw(yaw) * Quat::from_axis_angle(Vec3::X, pitch)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        let n = self.norm();
        n.is_finite() && (n - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }

    pub fn normalize(self) -> Quat {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Quat::new(self.x / n, self.y / n, self.z / n, self.w / n)
        } else {
            Quat::IDENTITY
        }
    }

    pub fn conjugate(self) -> Quat {
        Quat::new(-self.x, -self.y, -self.z, self.w)
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z + self.w * o.w
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v' = v + 2w(u×v) + 2u×(u×v)
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn forward(self) -> Vec3 {
        self.rotate(Vec3::FORWARD)
    }

    pub fn right(self) -> Vec3 {
        self.rotate(Vec3::X)
    }

    pub fn up(self) -> Vec3 {
        self.rotate(Vec3::UP)
    }

    /// Smallest rotation angle taking `self` to `o`, in degrees, in `[0, 180]`.
    pub fn angle_to_deg(self, o: Quat) -> f64 {
        let d = self.conjugate() * o;
        let v = Vec3::new(d.x, d.y, d.z).length();
        (2.0 * v.atan2(d.w.abs())).to_degrees()
    }

    pub fn slerp(self, o: Quat, u: f64) -> Quat {
        let mut cos = self.dot(o);
        let mut end = o;
        if cos < 0.0 {
            cos = -cos;
            end = Quat::new(-o.x, -o.y, -o.z, -o.w);
        }
        if cos > 0.9995 {
            return Quat::new(
                self.x + (end.x - self.x) * u,
                self.y + (end.y - self.y) * u,
                self.z + (end.z - self.z) * u,
                self.w + (end.w - self.w) * u,
            )
            .normalize();
        }
        let theta = cos.acos();
        let s = theta.sin();
        let a = ((1.0 - u) * theta).sin() / s;
        let b = (u * theta).sin() / s;
        Quat::new(self.x * a + end.x * b, self.y * a + end.y * b, self.z * a + end.z * b, self.w * a + end.w * b)
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    #[serde(rename = "p")]
    pub position: Vec3,
    #[serde(rename = "q")]
    pub orientation: Quat,
}

impl Pose {
    pub const fn new(position: Vec3, orientation: Quat) -> Self {
        Self { position, orientation }
    }

    pub fn at(position: Vec3) -> Self {
        Self::new(position, Quat::IDENTITY)
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation.forward()
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite() && self.orientation.is_unit()
    }

    /// Point given in this pose's local frame, expressed in world coordinates.
    pub fn transform_point(&self, local: Vec3) -> Vec3 {
        self.position + self.orientation.rotate(local)
    }
}

/// Rigid transform used to move whole scenes around (tests, scene authoring).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rigid {
    pub rotation: Quat,
    pub translation: Vec3,
}

impl Rigid {
    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn apply_dir(&self, d: Vec3) -> Vec3 {
        self.rotation.rotate(d)
    }

    pub fn apply_pose(&self, p: Pose) -> Pose {
        Pose::new(self.apply_point(p.position), (self.rotation * p.orientation).normalize())
    }
}
