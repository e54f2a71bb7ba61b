//! In-situ visualization geometry.
//!
//! Pure functions from session state, a [`VizConfig`] and the host pose to
//! renderer-agnostic [`GeometryPrimitive`]s. Nothing here keeps state except
//! the previous area square, which callers pass back in explicitly.

mod curves;
mod events;
mod locators;
mod performance;
mod snapshot;
mod views;

use serde::{Deserialize, Serialize};

pub use curves::{
    bezier_points, fps_line, link_curve, link_path, net_traffic_curve, traffic_width, Link, CURVE_SAMPLES, FLOOR_LIFT,
    LINK_ANCHOR_DOWN, LINK_ANCHOR_FORWARD,
};
pub use events::{calib_circles, offline_marker, tracking_marker, MAX_CALIB_CIRCLES};
pub use locators::{area_indicator, locator_arrow};
pub use performance::{hand_skeleton, info_panel, info_panel_lines, perf_bbox, trajectory_geometry, BBOX_HALF_WIDTH};
pub use snapshot::{build_snapshot, resolve_host_pose, FrameInputs, SceneSnapshot, SnapshotBuilder, VisitorSummary};
pub use views::{
    frustum_corners, grid_pitch, place_view_subject, place_views_host, view_frustum, LayoutMode, ViewLayout,
    CELL_AZIMUTH_DEG, CELL_ELEVATION_DEG, SUBJECT_VIEW_OFFSET,
};

use crate::color::Rgba;
use crate::error::ConfigError;
use crate::math::{Pose, Vec3};
use crate::telemetry::{DeviceMetrics, HandFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    SubjectCentric,
    HostCentric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Eye,
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    Auto,
    ForceGrid,
    ForceSphere,
}

macro_rules! viz_config {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty = $default:expr ),* $(,)?) => {
        /// Host-adjustable switches and parameters for every visualization.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct VizConfig {
            $( $(#[$doc])* pub $field: $ty, )*
        }

        impl Default for VizConfig {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        /// Partial [`VizConfig`]; absent fields are left unchanged.
        #[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct VizConfigPatch {
            $(
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl VizConfig {
            /// Returns the patched config, or an error without applying
            /// anything if the result would be invalid.
            pub fn apply(&self, patch: &VizConfigPatch) -> Result<VizConfig, ConfigError> {
                let mut next = self.clone();
                $( if let Some(v) = &patch.$field { next.$field = v.clone(); } )*
                next.validate()?;
                Ok(next)
            }
        }
    };
}

viz_config! {
    rendered_view: bool = true,
    frustum: bool = true,
    arrow: bool = true,
    link_curve: bool = true,
    area: bool = true,
    panel: bool = true,
    bbox: bool = true,
    fps_line: bool = true,
    hand_skeleton: bool = true,
    net_traffic: bool = true,
    trajectory: bool = true,
    offline_markers: bool = true,
    calib_circles: bool = true,
    placement: Placement = Placement::SubjectCentric,
    level: Level = Level::Eye,
    /// m
    hemisphere_radius: f64 = 1.5,
    grid_mode: GridMode = GridMode::Auto,
    /// m
    curve_w_min: f64 = 0.01,
    /// m
    curve_w_max: f64 = 0.15,
    flatten_links: bool = false,
    /// m
    exclusion_dist: f64 = 2.0,
    /// degrees
    exclusion_half_angle: f64 = 40.0,
    /// m
    frustum_depth: f64 = 0.5,
    /// degrees
    fov_h: f64 = 90.0,
    /// degrees
    fov_v: f64 = 90.0,
    /// Arc length (m) between mini-frustums along a trajectory.
    mini_frustum_spacing: f64 = 0.5,
    /// m
    arrow_height: f64 = 0.6,
    /// m
    panel_distance: f64 = 1.2,
    /// m
    area_margin: f64 = 0.5,
    /// Smoothing time constant of the area square, seconds.
    area_smoothing: f64 = 0.5,
    /// Frame rate mapped to red, Hz.
    fps_lo: f64 = crate::color::DEFAULT_FPS_LO,
    /// Frame rate mapped to green, Hz.
    fps_hi: f64 = crate::color::DEFAULT_FPS_HI,
}

impl VizConfig {
    /// Every visualization switched off.
    pub fn none() -> Self {
        let mut c = Self::default();
        for l in Layer::ALL {
            c.set_enabled(l, false);
        }
        c
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(name, format!("must be > 0, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::new(name, format!("must be >= 0, got {v}")))
            }
        };
        let angle = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 && v < 180.0 {
                Ok(())
            } else {
                Err(ConfigError::new(name, format!("must be in (0, 180) degrees, got {v}")))
            }
        };
        positive("hemisphere_radius", self.hemisphere_radius)?;
        positive("curve_w_min", self.curve_w_min)?;
        positive("curve_w_max", self.curve_w_max)?;
        if self.curve_w_min > self.curve_w_max {
            return Err(ConfigError::new("curve_w_min", "must not exceed curve_w_max"));
        }
        positive("exclusion_dist", self.exclusion_dist)?;
        angle("exclusion_half_angle", self.exclusion_half_angle)?;
        positive("frustum_depth", self.frustum_depth)?;
        angle("fov_h", self.fov_h)?;
        angle("fov_v", self.fov_v)?;
        positive("mini_frustum_spacing", self.mini_frustum_spacing)?;
        positive("arrow_height", self.arrow_height)?;
        positive("panel_distance", self.panel_distance)?;
        nonneg("area_margin", self.area_margin)?;
        nonneg("area_smoothing", self.area_smoothing)?;
        nonneg("fps_lo", self.fps_lo)?;
        if !(self.fps_hi.is_finite() && self.fps_hi > self.fps_lo) {
            return Err(ConfigError::new("fps_hi", "must be greater than fps_lo"));
        }
        Ok(())
    }

    pub fn enabled(&self, layer: Layer) -> bool {
        match layer {
            Layer::RenderedView => self.rendered_view,
            Layer::Frustum => self.frustum,
            Layer::Arrow => self.arrow,
            Layer::LinkCurve => self.link_curve,
            Layer::Area => self.area,
            Layer::Panel => self.panel,
            Layer::Bbox => self.bbox,
            Layer::FpsLine => self.fps_line,
            Layer::HandSkeleton => self.hand_skeleton,
            Layer::NetTraffic => self.net_traffic,
            Layer::Trajectory => self.trajectory,
            Layer::OfflineMarkers => self.offline_markers,
            Layer::CalibCircles => self.calib_circles,
        }
    }

    pub fn set_enabled(&mut self, layer: Layer, on: bool) {
        let flag = match layer {
            Layer::RenderedView => &mut self.rendered_view,
            Layer::Frustum => &mut self.frustum,
            Layer::Arrow => &mut self.arrow,
            Layer::LinkCurve => &mut self.link_curve,
            Layer::Area => &mut self.area,
            Layer::Panel => &mut self.panel,
            Layer::Bbox => &mut self.bbox,
            Layer::FpsLine => &mut self.fps_line,
            Layer::HandSkeleton => &mut self.hand_skeleton,
            Layer::NetTraffic => &mut self.net_traffic,
            Layer::Trajectory => &mut self.trajectory,
            Layer::OfflineMarkers => &mut self.offline_markers,
            Layer::CalibCircles => &mut self.calib_circles,
        };
        *flag = on;
    }

    pub fn fps_color(&self, fps: Option<f64>) -> Rgba {
        match fps {
            Some(f) => crate::color::fps_color(f, self.fps_lo, self.fps_hi),
            None => Rgba::NEUTRAL_GRAY,
        }
    }
}

/// Which visualization a drawable belongs to. Declaration order is the
/// draw order of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    RenderedView,
    Frustum,
    Arrow,
    LinkCurve,
    Area,
    Panel,
    Bbox,
    FpsLine,
    HandSkeleton,
    NetTraffic,
    Trajectory,
    OfflineMarkers,
    CalibCircles,
}

impl Layer {
    pub const ALL: [Layer; 13] = [
        Layer::RenderedView,
        Layer::Frustum,
        Layer::Arrow,
        Layer::LinkCurve,
        Layer::Area,
        Layer::Panel,
        Layer::Bbox,
        Layer::FpsLine,
        Layer::HandSkeleton,
        Layer::NetTraffic,
        Layer::Trajectory,
        Layer::OfflineMarkers,
        Layer::CalibCircles,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RibbonPattern {
    Arrowed,
    Plain,
}

/// Strip through `points`; all per-vertex arrays have the same length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ribbon {
    pub points: Vec<Vec3>,
    pub widths: Vec<f64>,
    pub colors: Vec<Rgba>,
    pub pattern: RibbonPattern,
    /// Pattern units per second along the point order.
    pub anim_speed: f64,
    pub bidirectional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub center: Vec3,
    pub normal: Vec3,
    pub up: Vec3,
    /// Width, height in meters.
    pub size: [f64; 2],
    pub lines: Vec<String>,
    pub owner: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texture_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrustumWire {
    pub apex: Pose,
    pub fov_h: f64,
    pub fov_v: f64,
    pub depth: f64,
    pub color: Rgba,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_texture_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxWire {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub color: Rgba,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    /// Tip of the arrow, pointing down at the visitor.
    pub position: Vec3,
    pub height: f64,
    pub color: Rgba,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleSet {
    pub center: Vec3,
    pub radii: Vec<f64>,
    pub colors: Vec<Rgba>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareOutline {
    pub center_xz: [f64; 2],
    pub y: f64,
    pub side: f64,
    pub color: Rgba,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joints: Vec<Pose>,
    pub axis_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadMarker {
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerKind {
    Offline,
    TrackingLost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMarker {
    pub position: Vec3,
    pub marker: MarkerKind,
    pub age_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryPrimitive {
    Ribbon(Ribbon),
    Panel(Panel),
    #[serde(rename = "frustum")]
    FrustumWire(FrustumWire),
    #[serde(rename = "box")]
    BoxWire(BoxWire),
    Arrow(Arrow),
    #[serde(rename = "circles")]
    CircleSet(CircleSet),
    #[serde(rename = "square")]
    SquareOutline(SquareOutline),
    Skeleton(Skeleton),
    #[serde(rename = "head")]
    HeadMarker(HeadMarker),
    EventMarker(EventMarker),
}

impl GeometryPrimitive {
    pub fn kind(&self) -> &'static str {
        match self {
            GeometryPrimitive::Ribbon(_) => "ribbon",
            GeometryPrimitive::Panel(_) => "panel",
            GeometryPrimitive::FrustumWire(_) => "frustum",
            GeometryPrimitive::BoxWire(_) => "box",
            GeometryPrimitive::Arrow(_) => "arrow",
            GeometryPrimitive::CircleSet(_) => "circles",
            GeometryPrimitive::SquareOutline(_) => "square",
            GeometryPrimitive::Skeleton(_) => "skeleton",
            GeometryPrimitive::HeadMarker(_) => "head",
            GeometryPrimitive::EventMarker(_) => "event_marker",
        }
    }
}

/// A primitive tagged with the visualization that produced it and the
/// visitor it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drawable {
    pub layer: Layer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(flatten)]
    pub primitive: GeometryPrimitive,
}

/// Everything the geometry functions need to know about one visitor.
#[derive(Debug, Clone, Copy)]
pub struct Subject<'a> {
    pub id: &'a str,
    pub head: Pose,
    /// Height of the floor the visitor stands on.
    pub floor_y: f64,
    pub color: Rgba,
    pub online: bool,
    pub tracking_ok: bool,
    pub metrics: Option<&'a DeviceMetrics>,
    pub view_ref: Option<&'a str>,
    pub left: Option<&'a HandFrame>,
    pub right: Option<&'a HandFrame>,
}

impl<'a> Subject<'a> {
    /// Online visitor with no metrics, hands or view, standing on floor 0.
    pub fn at(id: &'a str, head: Pose) -> Self {
        Self {
            id,
            head,
            floor_y: 0.0,
            color: crate::color::identity_color(0),
            online: true,
            tracking_ok: true,
            metrics: None,
            view_ref: None,
            left: None,
            right: None,
        }
    }

    pub fn fps(&self) -> Option<f64> {
        self.metrics.map(|m| m.fps)
    }
}

/// The host's head pose plus the floor under it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostView {
    pub pose: Pose,
    pub floor_y: f64,
}

impl HostView {
    pub fn new(pose: Pose, floor_y: f64) -> Self {
        Self { pose, floor_y }
    }

    /// Host forward projected onto the floor plane.
    pub fn forward_flat(&self) -> Vec3 {
        self.pose.forward().horizontal().normalize_or(Vec3::FORWARD)
    }

    /// Host right projected onto the floor plane.
    pub fn right_flat(&self) -> Vec3 {
        self.forward_flat().cross(Vec3::UP)
    }
}
