//! Colors and the color maps shared by the visualizations.

use serde::{Deserialize, Serialize};

/// Linear RGBA, every component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rgba {
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub a: f64,
}

impl From<[f64; 4]> for Rgba {
    fn from(c: [f64; 4]) -> Self {
        Rgba::new(c[0], c[1], c[2], c[3])
    }
}

impl From<Rgba> for [f64; 4] {
    fn from(c: Rgba) -> Self {
        [c.r, c.g, c.b, c.a]
    }
}

fn unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

impl Rgba {
    pub const RED: Rgba = Rgba::opaque(1.0, 0.0, 0.0);
    pub const GREEN: Rgba = Rgba::opaque(0.0, 1.0, 0.0);
    pub const BLUE: Rgba = Rgba::opaque(0.0, 0.0, 1.0);
    /// Used wherever a metric has not been reported yet.
    pub const NEUTRAL_GRAY: Rgba = Rgba::opaque(0.5, 0.5, 0.5);

    /// Clamping constructor.
    pub fn new(r: f64, g: f64, b: f64, a: f64) -> Self {
        Self { r: unit(r), g: unit(g), b: unit(b), a: unit(a) }
    }

    pub const fn opaque(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b, a: 1.0 }
    }

    pub fn with_alpha(self, a: f64) -> Self {
        Rgba { a: unit(a), ..self }
    }

    /// Blend toward luminance gray and halve opacity.
    pub fn desaturate(self) -> Self {
        let l = 0.2126 * self.r + 0.7152 * self.g + 0.0722 * self.b;
        let k = 0.75;
        Rgba::new(self.r + (l - self.r) * k, self.g + (l - self.g) * k, self.b + (l - self.b) * k, self.a * 0.5)
    }
}

pub const DEFAULT_FPS_LO: f64 = 30.0;
pub const DEFAULT_FPS_HI: f64 = 72.0;

/// Hue in degrees for a frame rate: 0° (red) at or below `fps_lo`, 120°
/// (green) at or above `fps_hi`.
pub fn fps_hue(fps: f64, fps_lo: f64, fps_hi: f64) -> f64 {
    debug_assert!(fps_lo < fps_hi);
    let fps = if fps.is_nan() { fps_lo } else { fps };
    let u = (fps.clamp(fps_lo, fps_hi) - fps_lo) / (fps_hi - fps_lo);
    120.0 * u
}

/// Green-to-red frame-rate color through the HSV hue wheel, full
/// saturation and value, opaque.
pub fn fps_color(fps: f64, fps_lo: f64, fps_hi: f64) -> Rgba {
    let (r, g, b) = hue_to_rgb(fps_hue(fps, fps_lo, fps_hi));
    Rgba::new(r, g, b, 1.0)
}

/// Fully saturated, full value HSV → RGB for a hue in degrees.
fn hue_to_rgb(hue: f64) -> (f64, f64, f64) {
    let h = hue.rem_euclid(360.0) / 60.0;
    let sector = h.floor() as u32;
    let f = h - h.floor();
    match sector {
        0 => (1.0, f, 0.0),
        1 => (1.0 - f, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, 1.0 - f, 1.0),
        4 => (f, 0.0, 1.0),
        _ => (1.0, 0.0, 1.0 - f),
    }
}

pub fn lerp_color(a: Rgba, b: Rgba, u: f64) -> Rgba {
    let u = unit(u);
    Rgba::new(a.r + (b.r - a.r) * u, a.g + (b.g - a.g) * u, a.b + (b.b - a.b) * u, a.a + (b.a - a.a) * u)
}

/// Twelve evenly spaced hues, assigned to visitors by join order.
pub fn identity_color(join_index: usize) -> Rgba {
    // Step through the wheel by 5/12 turn so consecutive joins are far apart.
    let slot = (join_index * 5) % 12;
    let (r, g, b) = hue_to_rgb(slot as f64 * 30.0);
    // Slightly soften so the palette does not collide with the pure
    // red/green of the frame-rate map.
    Rgba::new(0.15 + 0.85 * r, 0.15 + 0.85 * g, 0.15 + 0.85 * b, 1.0)
}

pub const PALETTE_SIZE: usize = 12;
