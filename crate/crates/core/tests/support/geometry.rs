use mrhost_core::color::Rgba;
use mrhost_core::math::{Pose, Quat, Rigid, Vec3};
use mrhost_core::session::AlphaSample;
use mrhost_core::viz::{
    area_indicator, calib_circles, frustum_corners, link_curve, locator_arrow, perf_bbox, place_view_subject,
    place_views_host, trajectory_geometry, view_frustum, GridMode, HostView, LayoutMode, Level, Link, SquareOutline,
    Subject, VizConfig, CURVE_SAMPLES, MAX_CALIB_CIRCLES,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub fn coord() -> impl Strategy<Value = f64> {
    -15.0..15.0f64
}

pub fn head_pos() -> impl Strategy<Value = Vec3> {
    (coord(), 1.0..2.2f64, coord()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

pub fn orientation() -> impl Strategy<Value = Quat> {
    (-3.2..3.2f64, -0.5..0.5f64).prop_map(|(yaw, pitch)| Quat::from_yaw_pitch(yaw, pitch).normalize())
}

pub fn head() -> impl Strategy<Value = Pose> {
    (head_pos(), orientation()).prop_map(|(p, q)| Pose::new(p, q))
}

pub fn yaw_rigid() -> impl Strategy<Value = Rigid> {
    (-3.2..3.2f64, coord(), -2.0..2.0f64, coord())
        .prop_map(|(yaw, x, y, z)| Rigid { rotation: Quat::from_yaw(yaw), translation: Vec3::new(x, y, z) })
}

fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
    a.distance(b) <= tol
}

fn subjects<'a>(ids: &'a [String], positions: &[Vec3]) -> Vec<Subject<'a>> {
    ids.iter().zip(positions).map(|(id, p)| Subject::at(id, Pose::at(*p))).collect()
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i:02}")).collect()
}

pub fn link_width(host: Pose, visitor: Pose, lo: f64, extra: f64, flatten: bool) -> Result<(), TestCaseError> {
    let cfg = VizConfig { curve_w_min: lo, curve_w_max: lo + extra, flatten_links: flatten, ..VizConfig::default() };
    let hv = HostView::new(host, 0.0);
    let s = Subject::at("v01", visitor);
    match link_curve(&hv, &s, &cfg) {
        Link::Excluded => {
            let to = visitor.position - host.position;
            prop_assert!(to.length() < cfg.exclusion_dist);
            prop_assert!(host.forward().angle_deg(to) < cfg.exclusion_half_angle);
        }
        Link::Curve(r) => {
            prop_assert_eq!(r.points.len(), CURVE_SAMPLES);
            prop_assert_eq!(r.widths.len(), CURVE_SAMPLES);
            prop_assert_eq!(r.widths[0], cfg.curve_w_min);
            prop_assert_eq!(r.widths[CURVE_SAMPLES - 1], cfg.curve_w_max);
            prop_assert!(r.widths.windows(2).all(|w| w[1] >= w[0]));
            if !flatten {
                prop_assert!(close(r.points[CURVE_SAMPLES - 1], visitor.position, 1e-9));
            }
        }
    }
    Ok(())
}

pub fn sphere_radius(host: Pose, visitors: &[Vec3], radius: f64, floor_level: bool) -> Result<(), TestCaseError> {
    let cfg = VizConfig {
        hemisphere_radius: radius,
        grid_mode: GridMode::ForceSphere,
        level: if floor_level { Level::Floor } else { Level::Eye },
        ..VizConfig::default()
    };
    let ids = ids(visitors.len());
    let subjects = subjects(&ids, visitors);
    let layout = place_views_host(&subjects, &HostView::new(host, 0.0), &cfg);
    prop_assert_eq!(layout.mode, LayoutMode::Sphere);
    prop_assert_eq!(layout.panels.len(), subjects.len());
    for p in &layout.panels {
        let d = p.center.distance(host.position);
        prop_assert!((d - radius).abs() <= 1e-6, "{} vs {}", d, radius);
        if !floor_level {
            prop_assert!(p.center.y >= host.position.y - 1e-9);
        }
    }
    Ok(())
}

pub fn grid_no_overlap(host: Pose, visitors: &[Vec3]) -> Result<(), TestCaseError> {
    let cfg = VizConfig { grid_mode: GridMode::ForceGrid, ..VizConfig::default() };
    let ids = ids(visitors.len());
    let subjects = subjects(&ids, visitors);
    let layout = place_views_host(&subjects, &HostView::new(host, 0.0), &cfg);
    let LayoutMode::Grid { columns, rows } = layout.mode else {
        return Err(TestCaseError::fail("grid expected"));
    };
    prop_assert!(columns * rows >= subjects.len());
    for (i, a) in layout.panels.iter().enumerate() {
        for b in &layout.panels[i + 1..] {
            prop_assert!(a.center.distance(b.center) >= a.size[1] - 1e-9);
        }
    }
    Ok(())
}

pub type AreaCase = (Vec<(f64, f64)>, Option<(f64, f64, f64)>, f64, f64, f64);

pub fn area_case() -> impl Strategy<Value = AreaCase> {
    (
        proptest::collection::vec((coord(), coord()), 1..33),
        proptest::option::of((coord(), coord(), 0.0..40.0f64)),
        0.0..2.0f64,
        0.0..2.0f64,
        0.0..3.0f64,
    )
}

pub fn area_contains((visitors, prev, dt, margin, tau): AreaCase) -> Result<(), TestCaseError> {
    let cfg = VizConfig { area_margin: margin, area_smoothing: tau, ..VizConfig::default() };
    let pts: Vec<Vec3> = visitors.iter().map(|&(x, z)| Vec3::new(x, 1.7, z)).collect();
    let prev = prev.map(|(x, z, side)| SquareOutline { center_xz: [x, z], y: 0.0, side, color: Rgba::GREEN });
    let sq = area_indicator(&pts, 0.0, prev.as_ref(), dt, &cfg).unwrap();
    // brute-force bounding box of the visitors
    let (mut x0, mut x1, mut z0, mut z1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, z) in &visitors {
        x0 = x0.min(x);
        x1 = x1.max(x);
        z0 = z0.min(z);
        z1 = z1.max(z);
    }
    let h = sq.side / 2.0;
    let [cx, cz] = sq.center_xz;
    let eps = 1e-9;
    prop_assert!(cx - h <= x0 + eps && cx + h >= x1 - eps, "x [{x0}, {x1}] vs {cx}±{h}");
    prop_assert!(cz - h <= z0 + eps && cz + h >= z1 - eps, "z [{z0}, {z1}] vs {cz}±{h}");
    if prev.is_none() {
        // unsmoothed square keeps the full margin on its tightest side
        let need = (x1 - cx).max(cx - x0).max(z1 - cz).max(cz - z0) + margin;
        prop_assert!((h - need).abs() < 1e-9);
    }
    Ok(())
}

pub fn calib_shading(count: u64) -> Result<(), TestCaseError> {
    let c = calib_circles(Vec3::ZERO, count, &VizConfig::default());
    prop_assert_eq!(c.radii.len() as u64, count.min(MAX_CALIB_CIRCLES));
    prop_assert_eq!(c.colors.len(), c.radii.len());
    prop_assert!(c.radii.windows(2).all(|w| w[1] > w[0]));
    prop_assert!(c.colors.windows(2).all(|w| w[1].r >= w[0].r && w[1].b <= w[0].b));
    if let (Some(first), Some(last)) = (c.colors.first(), c.colors.last()) {
        prop_assert_eq!(*first, Rgba::BLUE);
        if c.colors.len() > 1 {
            prop_assert_eq!(*last, Rgba::RED);
        }
    }
    Ok(())
}

pub fn equivariance(host: Pose, visitor: Pose, tf: Rigid, floor: f64) -> Result<(), TestCaseError> {
    let cfg = VizConfig::default();
    let tol = 1e-9;
    let s = Subject { floor_y: floor, ..Subject::at("v01", visitor) };
    let moved = Subject { head: tf.apply_pose(visitor), floor_y: floor + tf.translation.y, ..s };
    let h = HostView::new(host, floor);
    let mh = HostView::new(tf.apply_pose(host), floor + tf.translation.y);

    let f = view_frustum(&s, &cfg);
    let mf = view_frustum(&moved, &cfg);
    for (a, b) in frustum_corners(&f.apex, f.fov_h, f.fov_v, f.depth)
        .iter()
        .zip(frustum_corners(&mf.apex, mf.fov_h, mf.fov_v, mf.depth))
    {
        prop_assert!(close(tf.apply_point(*a), b, tol));
    }
    prop_assert!(close(tf.apply_point(locator_arrow(&s, &cfg).position), locator_arrow(&moved, &cfg).position, tol));
    let (b0, b1) = (perf_bbox(&s, &cfg), perf_bbox(&moved, &cfg));
    prop_assert!(close(tf.apply_point(b0.center), b1.center, tol));
    prop_assert!(close(b0.half_extents, b1.half_extents, tol));
    let (c0, c1) = (calib_circles(visitor.position, 5, &cfg), calib_circles(tf.apply_point(visitor.position), 5, &cfg));
    prop_assert!(close(tf.apply_point(c0.center), c1.center, tol));
    prop_assert_eq!(c0.radii, c1.radii);
    let (p0, p1) = (place_view_subject(&s, &h), place_view_subject(&moved, &mh));
    prop_assert!(close(tf.apply_point(p0.center), p1.center, 1e-6));
    match (link_curve(&h, &s, &cfg), link_curve(&mh, &moved, &cfg)) {
        (Link::Curve(a), Link::Curve(b)) => {
            for (pa, pb) in a.points.iter().zip(&b.points) {
                prop_assert!(close(tf.apply_point(*pa), *pb, 1e-8));
            }
        }
        (Link::Excluded, Link::Excluded) => {}
        // the cone test may flip right at its boundary
        _ => {
            let to = visitor.position - host.position;
            let margin = (host.forward().angle_deg(to) - cfg.exclusion_half_angle)
                .abs()
                .min((to.length() - cfg.exclusion_dist).abs());
            prop_assert!(margin < 1e-6);
        }
    }
    Ok(())
}

/// Number of mini-frusta along a polyline, from prefix sums of segment
/// lengths: a frustum at sample 0, then at the first sample whose arc
/// length from the previous frustum reaches the spacing.
pub fn arc_length_oracle(points: &[Vec3], spacing: f64) -> usize {
    if points.is_empty() {
        return 0;
    }
    let mut arc = vec![0.0];
    for w in points.windows(2) {
        let d = w[1] - w[0];
        arc.push(arc.last().unwrap() + (d.x * d.x + d.y * d.y + d.z * d.z).sqrt());
    }
    let mut count = 1;
    let mut anchor = 0.0;
    for &s in &arc[1..] {
        if s - anchor >= spacing - 1e-9 {
            count += 1;
            anchor = s;
        }
    }
    count
}

pub fn polyline_steps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    proptest::collection::vec((-0.6..0.6f64, -0.05..0.05f64, -0.6..0.6f64), 0..80)
}

pub fn mini_frusta(steps: &[(f64, f64, f64)], spacing: f64) -> Result<(), TestCaseError> {
    let mut p = Vec3::new(0.0, 1.7, 0.0);
    let mut pts = vec![p];
    for &(dx, dy, dz) in steps {
        p += Vec3::new(dx, dy, dz);
        pts.push(p);
    }
    let samples: Vec<AlphaSample> = pts
        .iter()
        .enumerate()
        .map(|(i, &q)| AlphaSample { t: i as u64 * 50, pose: Pose::at(q), fps: Some(60.0), alpha: 1.0 })
        .collect();
    let cfg = VizConfig { mini_frustum_spacing: spacing, ..VizConfig::default() };
    let (ribbon, frusta) = trajectory_geometry(&samples, &cfg);
    prop_assert_eq!(frusta.len(), arc_length_oracle(&pts, spacing));
    prop_assert_eq!(ribbon.is_some(), pts.len() >= 2);
    Ok(())
}

fn e<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| format!("{e}"))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

/// Every geometry property at the case counts used by the test suite.
/// Returns one `(name, cases, outcome)` per property.
pub fn all_properties() -> Vec<(&'static str, u32, Result<(), String>)> {
    let mut out = Vec::new();
    let n = 2000;
    out.push((
        "link width monotone, exact endpoints",
        n,
        e(runner(n).run(&(head(), head(), 0.001..0.2f64, 0.001..0.3f64, any::<bool>()), |(h, v, lo, x, f)| {
            link_width(h, v, lo, x, f)
        })),
    ));
    out.push((
        "hemisphere panels at radius ±1e-6 m",
        n,
        e(runner(n).run(
            &(head(), proptest::collection::vec(head_pos(), 1..33), 0.3..4.0f64, any::<bool>()),
            |(h, v, r, f)| sphere_radius(h, &v, r, f),
        )),
    ));
    out.push((
        "grid panels do not overlap",
        n,
        e(runner(n).run(&(head(), proptest::collection::vec(head_pos(), 1..33)), |(h, v)| grid_no_overlap(h, &v))),
    ));
    out.push(("area square contains all visitors", n, e(runner(n).run(&area_case(), area_contains))));
    out.push(("calib circles min(c,8), blue→red", n, e(runner(n).run(&(0u64..100), calib_shading))));
    out.push((
        "rigid-transform equivariance",
        n,
        e(runner(n).run(&(head(), head(), yaw_rigid(), -1.0..0.5f64), |(h, v, tf, f)| equivariance(h, v, tf, f))),
    ));
    out.push((
        "mini-frustum count vs arc-length oracle",
        1000,
        e(runner(1000).run(&(polyline_steps(), 0.05..2.0f64), |(s, sp)| mini_frusta(&s, sp))),
    ));
    out
}
