use super::{
    BoxWire, FrustumWire, GeometryPrimitive, HeadMarker, HostView, Level, Panel, Placement, Ribbon, RibbonPattern,
    Skeleton, Subject, VizConfig, FLOOR_LIFT,
};
use crate::math::Vec3;
use crate::session::AlphaSample;

const PANEL_SIZE: [f64; 2] = [0.4, 0.22];
const PANEL_ABOVE_HEAD: f64 = 0.3;
const PANEL_STACK_PITCH: f64 = 0.25;
const PANEL_SIDE_OFFSET: f64 = 0.6;
const FLOOR_PANEL_DISTANCE: f64 = 2.0;
const FLOOR_PANEL_SIDE_OFFSET: f64 = 2.0;
/// Horizontal half-extent of the performance box, meters.
pub const BBOX_HALF_WIDTH: f64 = 0.3;
const BBOX_ABOVE_HEAD: f64 = 0.2;
const JOINT_AXIS_LEN: f64 = 0.02;
const TRAJECTORY_WIDTH: f64 = 0.03;
const MINI_FRUSTUM_DEPTH: f64 = 0.15;

pub fn info_panel_lines(subject: &Subject) -> Vec<String> {
    let mut lines = vec![subject.id.to_owned()];
    match subject.metrics {
        Some(m) => {
            lines.push(format!("FPS {:.1}", m.fps));
            lines.push(format!("BAT {:.0}%", m.battery * 100.0));
            lines.push(format!("CPU {:.0}% GPU {:.0}%", m.cpu * 100.0, m.gpu * 100.0));
        }
        None => lines.push("no data".to_owned()),
    }
    let status = match (subject.online, subject.tracking_ok) {
        (false, _) => "offline",
        (true, false) => "tracking lost",
        (true, true) => "online",
    };
    lines.push(status.to_owned());
    lines
}

/// Text panel for one visitor. `index` is the visitor's slot when panels
/// are stacked in front of the host.
pub fn info_panel(subject: &Subject, index: usize, host: &HostView, cfg: &VizConfig) -> Panel {
    let fwd = host.forward_flat();
    let right = host.right_flat();
    let (center, normal, up) = match (cfg.placement, cfg.level) {
        (Placement::SubjectCentric, _) => {
            let center = subject.head.position + Vec3::UP * PANEL_ABOVE_HEAD;
            let normal = (host.pose.position - center)
                .horizontal()
                .try_normalize()
                .unwrap_or_else(|| subject.head.forward().horizontal().normalize_or(Vec3::FORWARD));
            (center, normal, Vec3::UP)
        }
        (Placement::HostCentric, Level::Eye) => (
            host.pose.position + fwd * cfg.panel_distance - right * PANEL_SIDE_OFFSET
                + Vec3::UP * (PANEL_ABOVE_HEAD - PANEL_STACK_PITCH * index as f64),
            -fwd,
            Vec3::UP,
        ),
        (Placement::HostCentric, Level::Floor) => (
            host.pose.position.with_y(host.floor_y + FLOOR_LIFT)
                + fwd * (FLOOR_PANEL_DISTANCE + PANEL_STACK_PITCH * index as f64)
                - right * FLOOR_PANEL_SIDE_OFFSET,
            Vec3::UP,
            fwd,
        ),
    };
    Panel {
        center,
        normal,
        up,
        size: PANEL_SIZE,
        lines: info_panel_lines(subject),
        owner: subject.id.to_owned(),
        texture_ref: None,
    }
}

/// Wireframe box from the floor to just above the head, colored by frame
/// rate, gray without metrics.
pub fn perf_bbox(subject: &Subject, cfg: &VizConfig) -> BoxWire {
    let p = subject.head.position;
    let bottom = subject.floor_y.min(p.y);
    let top = p.y + BBOX_ABOVE_HEAD;
    BoxWire {
        center: Vec3::new(p.x, (top + bottom) / 2.0, p.z),
        half_extents: Vec3::new(BBOX_HALF_WIDTH, (top - bottom) / 2.0, BBOX_HALF_WIDTH),
        color: cfg.fps_color(subject.fps()),
    }
}

/// Joint frames of each tracked hand followed by a head marker.
pub fn hand_skeleton(subject: &Subject) -> Vec<GeometryPrimitive> {
    let mut out: Vec<GeometryPrimitive> = [subject.left, subject.right]
        .into_iter()
        .flatten()
        .filter(|h| h.tracked && !h.joints.is_empty())
        .map(|h| GeometryPrimitive::Skeleton(Skeleton { joints: h.joints.clone(), axis_len: JOINT_AXIS_LEN }))
        .collect();
    out.push(GeometryPrimitive::HeadMarker(HeadMarker { pose: subject.head }));
    out
}

/// Fading ribbon through a windowed trace plus a small frustum at the first
/// sample and every `mini_frustum_spacing` meters of path after it.
pub fn trajectory_geometry(samples: &[AlphaSample], cfg: &VizConfig) -> (Option<Ribbon>, Vec<FrustumWire>) {
    let color = |s: &AlphaSample| cfg.fps_color(s.fps).with_alpha(s.alpha);
    let mut frusta = Vec::new();
    let mut since = 0.0;
    for (i, s) in samples.iter().enumerate() {
        if i > 0 {
            since += samples[i - 1].pose.position.distance(s.pose.position);
        }
        if i == 0 || since >= cfg.mini_frustum_spacing - 1e-9 {
            frusta.push(FrustumWire {
                apex: s.pose,
                fov_h: cfg.fov_h,
                fov_v: cfg.fov_v,
                depth: MINI_FRUSTUM_DEPTH,
                color: color(s),
                face_texture_ref: None,
            });
            since = 0.0;
        }
    }
    let ribbon = (samples.len() >= 2).then(|| Ribbon {
        points: samples.iter().map(|s| s.pose.position).collect(),
        widths: vec![TRAJECTORY_WIDTH; samples.len()],
        colors: samples.iter().map(color).collect(),
        pattern: RibbonPattern::Plain,
        anim_speed: 0.0,
        bidirectional: false,
    });
    (ribbon, frusta)
}
