use serde::{Deserialize, Serialize};

use super::{FrustumWire, GridMode, HostView, Level, Panel, Subject, VizConfig};
use crate::math::{Pose, Vec3};

/// Sideways offset of a subject-centric view panel from the head, meters.
pub const SUBJECT_VIEW_OFFSET: f64 = 0.45;
/// Angular size of one grid cell as seen from the host, degrees.
pub const CELL_AZIMUTH_DEG: f64 = 18.0;
pub const CELL_ELEVATION_DEG: f64 = 12.0;
const SUBJECT_PANEL_SIZE: [f64; 2] = [0.4, 0.3];
const PANEL_FILL: f64 = 0.9;
const FLOOR_GRID_DISTANCE: f64 = 2.0;

/// The four far-plane corners of a view frustum: top-left, top-right,
/// bottom-right, bottom-left as seen by the viewer.
pub fn frustum_corners(apex: &Pose, fov_h_deg: f64, fov_v_deg: f64, depth: f64) -> [Vec3; 4] {
    let hx = (fov_h_deg.to_radians() / 2.0).tan() * depth;
    let hy = (fov_v_deg.to_radians() / 2.0).tan() * depth;
    [(-hx, hy), (hx, hy), (hx, -hy), (-hx, -hy)].map(|(x, y)| apex.transform_point(Vec3::new(x, y, -depth)))
}

pub fn view_frustum(subject: &Subject, cfg: &VizConfig) -> FrustumWire {
    FrustumWire {
        apex: subject.head,
        fov_h: cfg.fov_h,
        fov_v: cfg.fov_v,
        depth: cfg.frustum_depth,
        color: subject.color,
        face_texture_ref: subject.view_ref.map(str::to_owned),
    }
}

/// Panel beside the visitor's head, on whichever side is easier for the
/// host to see past the visitor. Ties go to the visitor's right.
pub fn place_view_subject(subject: &Subject, host: &HostView) -> Panel {
    let head = subject.head.position;
    let host_head = host.pose.position;
    let right = subject.head.orientation.right().horizontal().normalize_or(Vec3::X);
    let axis = head - host_head;
    let right_c = head + right * SUBJECT_VIEW_OFFSET;
    let left_c = head - right * SUBJECT_VIEW_OFFSET;
    let center =
        if axis.angle_deg(left_c - host_head) > axis.angle_deg(right_c - host_head) { left_c } else { right_c };
    let normal =
        (host_head - center).try_normalize().unwrap_or_else(|| subject.head.forward().normalize_or(Vec3::FORWARD));
    Panel {
        center,
        normal,
        up: Vec3::UP,
        size: SUBJECT_PANEL_SIZE,
        lines: Vec::new(),
        owner: subject.id.to_owned(),
        texture_ref: subject.view_ref.map(str::to_owned),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LayoutMode {
    Sphere,
    Grid { columns: usize, rows: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewLayout {
    pub mode: LayoutMode,
    /// One panel per input subject, in input order.
    pub panels: Vec<Panel>,
}

/// Horizontal and vertical grid spacing for a hemisphere radius.
pub fn grid_pitch(radius: f64) -> (f64, f64) {
    (
        2.0 * radius * (CELL_AZIMUTH_DEG / 2.0).to_radians().tan(),
        2.0 * radius * (CELL_ELEVATION_DEG / 2.0).to_radians().tan(),
    )
}

struct Bearing {
    dir: Vec3,
    azimuth: f64,
    elevation: f64,
}

fn bearing(host: &HostView, target: Vec3, level: Level) -> Bearing {
    let fwd = host.forward_flat();
    let right = host.right_flat();
    let mut d = (target - host.pose.position).normalize_or(fwd);
    if level == Level::Eye && d.y < 0.0 {
        d = d.with_y(0.0).normalize_or(fwd);
    }
    Bearing {
        dir: d,
        azimuth: d.dot(right).atan2(d.dot(fwd)).to_degrees(),
        elevation: d.y.clamp(-1.0, 1.0).asin().to_degrees(),
    }
}

fn azimuth_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

fn overlapping(bearings: &[Bearing]) -> bool {
    bearings.iter().enumerate().any(|(i, a)| {
        bearings[i + 1..].iter().any(|b| {
            azimuth_gap(a.azimuth, b.azimuth) < CELL_AZIMUTH_DEG
                && (a.elevation - b.elevation).abs() < CELL_ELEVATION_DEG
        })
    })
}

/// Arranges every subject's view panel around the host: on a hemisphere in
/// the visitor's direction, or in a grid when panels would overlap.
pub fn place_views_host(subjects: &[Subject], host: &HostView, cfg: &VizConfig) -> ViewLayout {
    let r = cfg.hemisphere_radius;
    let bearings: Vec<Bearing> = subjects.iter().map(|s| bearing(host, s.head.position, cfg.level)).collect();
    let grid = match cfg.grid_mode {
        GridMode::ForceGrid => true,
        GridMode::ForceSphere => false,
        GridMode::Auto => overlapping(&bearings),
    };
    if subjects.is_empty() || !grid {
        let panels = subjects
            .iter()
            .zip(&bearings)
            .map(|(s, b)| Panel {
                center: host.pose.position + b.dir * r,
                normal: -b.dir,
                up: Vec3::UP,
                size: [PANEL_FILL * grid_pitch(r).0, PANEL_FILL * grid_pitch(r).1],
                lines: Vec::new(),
                owner: s.id.to_owned(),
                texture_ref: s.view_ref.map(str::to_owned),
            })
            .collect();
        return ViewLayout { mode: LayoutMode::Sphere, panels };
    }

    let n = subjects.len();
    let columns = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(columns);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        bearings[a].azimuth.total_cmp(&bearings[b].azimuth).then_with(|| subjects[a].id.cmp(subjects[b].id))
    });
    let (px, py) = grid_pitch(r);
    let fwd = host.forward_flat();
    let right = host.right_flat();
    let mut panels = vec![None; n];
    for (slot, &i) in order.iter().enumerate() {
        let col = (slot % columns) as f64 - (columns as f64 - 1.0) / 2.0;
        let row = (slot / columns) as f64 - (rows as f64 - 1.0) / 2.0;
        let (center, normal, up) = match cfg.level {
            Level::Eye => (host.pose.position + fwd * r + right * (col * px) - Vec3::UP * (row * py), -fwd, Vec3::UP),
            Level::Floor => {
                let base = host.pose.position.with_y(host.floor_y + super::FLOOR_LIFT);
                (base + fwd * (FLOOR_GRID_DISTANCE - row * py) + right * (col * px), Vec3::UP, fwd)
            }
        };
        panels[i] = Some(Panel {
            center,
            normal,
            up,
            size: [PANEL_FILL * px, PANEL_FILL * py],
            lines: Vec::new(),
            owner: subjects[i].id.to_owned(),
            texture_ref: subjects[i].view_ref.map(str::to_owned),
        });
    }
    ViewLayout {
        mode: LayoutMode::Grid { columns, rows },
        panels: panels.into_iter().map(|p| p.expect("every slot assigned")).collect(),
    }
}
