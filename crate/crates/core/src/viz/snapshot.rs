use serde::{Deserialize, Serialize};

use super::{
    area_indicator, calib_circles, fps_line, hand_skeleton, info_panel, link_curve, locator_arrow, net_traffic_curve,
    offline_marker, perf_bbox, place_view_subject, place_views_host, tracking_marker, trajectory_geometry,
    view_frustum, Drawable, GeometryPrimitive, HostView, Layer, LayoutMode, Placement, SquareOutline, Subject,
    VizConfig,
};
use crate::color::{identity_color, Rgba};
use crate::exec::{map_ordered, ExecMode};
use crate::math::{Pose, Vec3};
use crate::scene::{SceneConfig, EYE_HEIGHT};
use crate::session::{truncate_and_alpha, Diagnostics, FilterParams, Session, Tracking, ViewRef, VisitorState};
use crate::telemetry::{Millis, Role};

/// Per-visitor status line of a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitorSummary {
    pub id: String,
    pub role: Role,
    pub model: String,
    pub online: bool,
    pub tracking_ok: bool,
    pub color: Rgba,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<f64>,
    pub calibrations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<ViewRef>,
}

impl VisitorSummary {
    fn of(v: &VisitorState) -> Self {
        Self {
            id: v.id.clone(),
            role: v.role,
            model: v.model.clone(),
            online: v.is_online(),
            tracking_ok: v.tracking == Tracking::Ok,
            color: identity_color(v.join_index),
            position: v.position(),
            fps: v.fps(),
            battery: v.metrics.map(|m| m.battery),
            calibrations: v.calibration_count_by_station.values().sum(),
            view: v.latest_view.clone(),
        }
    }
}

/// Everything the dashboard draws for one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    /// Server time, ms.
    pub t: Millis,
    pub visitors: Vec<VisitorSummary>,
    /// Ordered by layer, then visitor id.
    pub primitives: Vec<Drawable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<Pose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_layout: Option<LayoutMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<VizConfig>,
    /// Active trajectory filter, including the live trail window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

impl SceneSnapshot {
    pub fn empty(t: Millis) -> Self {
        Self {
            t,
            visitors: Vec::new(),
            primitives: Vec::new(),
            tick: None,
            host: None,
            view_layout: None,
            config: None,
            filter: None,
            diagnostics: None,
        }
    }

    pub fn layer(&self, layer: Layer) -> impl Iterator<Item = &Drawable> {
        self.primitives.iter().filter(move |d| d.layer == layer)
    }

    pub fn area(&self) -> Option<&SquareOutline> {
        self.layer(Layer::Area).find_map(|d| match &d.primitive {
            GeometryPrimitive::SquareOutline(s) => Some(s),
            _ => None,
        })
    }
}

/// Inputs of one snapshot build.
#[derive(Debug, Clone, Copy)]
pub struct FrameInputs<'a> {
    pub session: &'a Session,
    pub scene: &'a SceneConfig,
    pub host: HostView,
    pub cfg: &'a VizConfig,
    pub now: Millis,
    /// Area square of the previous snapshot, for smoothing.
    pub prev_area: Option<&'a SquareOutline>,
    /// Seconds since the previous snapshot.
    pub dt_s: f64,
}

/// The host's head: a connected host device if there is one, else
/// `fallback`, else the middle of the scene at eye height.
pub fn resolve_host_pose(session: &Session, scene: &SceneConfig, fallback: Option<Pose>) -> HostView {
    let pose = session
        .visitors()
        .find(|v| v.role == Role::Host && v.is_online())
        .and_then(|v| v.head)
        .or(fallback)
        .unwrap_or_else(|| {
            let lowest = scene.floors.iter().copied().fold(f64::INFINITY, f64::min);
            let floor = if lowest.is_finite() { lowest } else { scene.bounds.min.y };
            Pose::at(scene.bounds.center().with_y(floor + EYE_HEIGHT))
        });
    HostView::new(pose, scene.floor_under(pose.position.y))
}

fn subject_of<'a>(v: &'a VisitorState, head: Pose, scene: &SceneConfig) -> Subject<'a> {
    Subject {
        id: &v.id,
        head,
        floor_y: scene.floor_under(head.position.y),
        color: identity_color(v.join_index),
        online: v.is_online(),
        tracking_ok: v.tracking == Tracking::Ok,
        metrics: v.metrics.as_ref(),
        view_ref: v.latest_view.as_ref().map(|r| r.id.as_str()),
        left: v.left.as_ref(),
        right: v.right.as_ref(),
    }
}

fn per_visitor(v: &VisitorState, s: &Subject, inp: &FrameInputs) -> Vec<Drawable> {
    let cfg = inp.cfg;
    let host = &inp.host;
    let mut out = Vec::new();
    let mut push = |layer: Layer, primitive: GeometryPrimitive| {
        if cfg.enabled(layer) {
            out.push(Drawable { layer, subject: Some(s.id.to_owned()), primitive });
        }
    };
    if s.online {
        if cfg.placement == Placement::SubjectCentric && cfg.rendered_view {
            push(Layer::RenderedView, GeometryPrimitive::Panel(place_view_subject(s, host)));
        }
        if cfg.frustum {
            push(Layer::Frustum, GeometryPrimitive::FrustumWire(view_frustum(s, cfg)));
        }
        if cfg.link_curve {
            if let Some(r) = link_curve(host, s, cfg).ribbon() {
                push(Layer::LinkCurve, GeometryPrimitive::Ribbon(r));
            }
        }
        if cfg.fps_line {
            if let Some(r) = fps_line(host, s, cfg) {
                push(Layer::FpsLine, GeometryPrimitive::Ribbon(r));
            }
        }
        if cfg.hand_skeleton {
            for p in hand_skeleton(s) {
                push(Layer::HandSkeleton, p);
            }
        }
        if let (true, Some(m)) = (cfg.net_traffic, s.metrics) {
            if let Some(pair) = net_traffic_curve(s.head.position, inp.scene.server_anchor(), m, cfg) {
                for r in pair {
                    push(Layer::NetTraffic, GeometryPrimitive::Ribbon(r));
                }
            }
        }
    }
    if cfg.arrow {
        push(Layer::Arrow, GeometryPrimitive::Arrow(locator_arrow(s, cfg)));
    }
    if cfg.panel && cfg.placement == Placement::SubjectCentric {
        push(Layer::Panel, GeometryPrimitive::Panel(info_panel(s, 0, host, cfg)));
    }
    if cfg.bbox {
        push(Layer::Bbox, GeometryPrimitive::BoxWire(perf_bbox(s, cfg)));
    }
    if cfg.trajectory {
        let samples = truncate_and_alpha(&v.history, v.device_clock_at(inp.now), &v.history.params);
        let (ribbon, frusta) = trajectory_geometry(&samples, cfg);
        if let Some(r) = ribbon {
            push(Layer::Trajectory, GeometryPrimitive::Ribbon(r));
        }
        for f in frusta {
            push(Layer::Trajectory, GeometryPrimitive::FrustumWire(f));
        }
    }
    if cfg.offline_markers {
        if let Some(m) = v.offline_event().and_then(|e| offline_marker(&e, inp.now)) {
            push(Layer::OfflineMarkers, GeometryPrimitive::EventMarker(m));
        }
        if let Tracking::Lost { since, position } = v.tracking {
            let at = position.unwrap_or(s.head.position);
            push(Layer::OfflineMarkers, GeometryPrimitive::EventMarker(tracking_marker(at, since, inp.now)));
        }
    }
    out
}

/// Builds one snapshot. Per-visitor geometry runs under `mode`; the result
/// is identical for every mode.
pub fn build_snapshot(inp: &FrameInputs, mode: ExecMode) -> SceneSnapshot {
    let cfg = inp.cfg;
    let items: Vec<(&VisitorState, Subject)> = inp
        .session
        .visitors()
        .filter(|v| v.role == Role::Visitor)
        .filter_map(|v| v.head.map(|h| (v, subject_of(v, h, inp.scene))))
        .collect();

    let mut primitives: Vec<Drawable> =
        map_ordered(mode, &items, |(v, s)| per_visitor(v, s, inp)).into_iter().flatten().collect();

    let online: Vec<Subject> = items.iter().map(|(_, s)| *s).filter(|s| s.online).collect();
    let mut view_layout = None;
    if cfg.placement == Placement::HostCentric {
        if cfg.rendered_view {
            let layout = place_views_host(&online, &inp.host, cfg);
            view_layout = Some(layout.mode);
            primitives.extend(layout.panels.into_iter().map(|p| Drawable {
                layer: Layer::RenderedView,
                subject: Some(p.owner.clone()),
                primitive: GeometryPrimitive::Panel(p),
            }));
        }
        if cfg.panel {
            primitives.extend(items.iter().enumerate().map(|(i, (_, s))| Drawable {
                layer: Layer::Panel,
                subject: Some(s.id.to_owned()),
                primitive: GeometryPrimitive::Panel(info_panel(s, i, &inp.host, cfg)),
            }));
        }
    }
    if cfg.area {
        let positions: Vec<Vec3> = online.iter().map(|s| s.head.position).collect();
        let floor = online.iter().map(|s| s.floor_y).fold(f64::INFINITY, f64::min);
        if let Some(sq) = area_indicator(&positions, floor, inp.prev_area, inp.dt_s, cfg) {
            primitives.push(Drawable {
                layer: Layer::Area,
                subject: None,
                primitive: GeometryPrimitive::SquareOutline(sq),
            });
        }
    }
    if cfg.calib_circles {
        let totals = inp.session.calibration_totals();
        let mut stations: Vec<_> = inp.scene.stations.iter().collect();
        stations.sort_by(|a, b| a.id.cmp(&b.id));
        for st in stations {
            let count = totals.get(&st.id).copied().unwrap_or(0);
            if count > 0 {
                primitives.push(Drawable {
                    layer: Layer::CalibCircles,
                    subject: None,
                    primitive: GeometryPrimitive::CircleSet(calib_circles(st.position, count, cfg)),
                });
            }
        }
    }
    primitives.sort_by(|a, b| a.layer.cmp(&b.layer).then_with(|| a.subject.cmp(&b.subject)));

    SceneSnapshot {
        t: inp.now,
        visitors: inp.session.visitors().map(VisitorSummary::of).collect(),
        primitives,
        tick: None,
        host: Some(inp.host.pose),
        view_layout,
        config: None,
        filter: None,
        diagnostics: None,
    }
}

/// Carries the area square and tick counter from one snapshot to the next.
#[derive(Debug, Clone, Default)]
pub struct SnapshotBuilder {
    pub mode: ExecMode,
    /// Used as the host pose while no host device is connected.
    pub host_override: Option<Pose>,
    prev_area: Option<SquareOutline>,
    last_t: Option<Millis>,
    tick: u64,
}

impl SnapshotBuilder {
    pub fn new(mode: ExecMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn build(&mut self, session: &Session, scene: &SceneConfig, cfg: &VizConfig, now: Millis) -> SceneSnapshot {
        let host = resolve_host_pose(session, scene, self.host_override);
        let dt_s = self.last_t.map_or(0.0, |t| now.saturating_sub(t) as f64 / 1000.0);
        let inputs = FrameInputs { session, scene, host, cfg, now, prev_area: self.prev_area.as_ref(), dt_s };
        let mut snap = build_snapshot(&inputs, self.mode);
        self.prev_area = snap.area().cloned();
        self.last_t = Some(now);
        self.tick += 1;
        snap.tick = Some(self.tick);
        snap.config = Some(cfg.clone());
        snap.filter = Some(session.config().filter);
        snap.diagnostics = Some(session.diagnostics());
        snap
    }
}
