use super::{Arrow, SquareOutline, Subject, VizConfig};
use crate::color::Rgba;
use crate::math::Vec3;

const AREA_COLOR: Rgba = Rgba::opaque(0.2, 0.9, 0.4);

/// Downward arrow floating above the visitor's head, dimmed while offline.
pub fn locator_arrow(subject: &Subject, cfg: &VizConfig) -> Arrow {
    let color = if subject.online { subject.color } else { subject.color.desaturate() };
    Arrow { position: subject.head.position + Vec3::UP * cfg.arrow_height, height: cfg.arrow_height, color }
}

fn max_deviation(points: &[Vec3], cx: f64, cz: f64) -> f64 {
    points.iter().map(|p| (p.x - cx).abs().max((p.z - cz).abs())).fold(0.0, f64::max)
}

/// Square on the floor centered on the visitors' centroid and covering all
/// of them plus a margin. With a previous square, center and side move
/// toward the new target exponentially with time constant
/// `cfg.area_smoothing`; the side never shrinks below what still covers
/// every visitor.
pub fn area_indicator(
    positions: &[Vec3],
    floor_y: f64,
    prev: Option<&SquareOutline>,
    dt_s: f64,
    cfg: &VizConfig,
) -> Option<SquareOutline> {
    if positions.is_empty() {
        return None;
    }
    let n = positions.len() as f64;
    let cx = positions.iter().map(|p| p.x).sum::<f64>() / n;
    let cz = positions.iter().map(|p| p.z).sum::<f64>() / n;
    let side = 2.0 * max_deviation(positions, cx, cz) + 2.0 * cfg.area_margin;
    let raw = SquareOutline { center_xz: [cx, cz], y: floor_y, side, color: AREA_COLOR };
    let Some(prev) = prev else {
        return Some(raw);
    };
    let a = if cfg.area_smoothing > 0.0 { 1.0 - (-dt_s.max(0.0) / cfg.area_smoothing).exp() } else { 1.0 };
    let sx = prev.center_xz[0] + a * (cx - prev.center_xz[0]);
    let sz = prev.center_xz[1] + a * (cz - prev.center_xz[1]);
    let side = (prev.side + a * (side - prev.side)).max(2.0 * max_deviation(positions, sx, sz));
    Some(SquareOutline { center_xz: [sx, sz], side, ..raw })
}
