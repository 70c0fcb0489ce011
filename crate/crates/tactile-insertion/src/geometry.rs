//! Convex cross-sections, planar pose errors, and clearance-inflated
//! containment tests for the four insertion environments.
//!
//! An insertion attempt succeeds when every point of the object's boundary,
//! transformed by the current pose error, lies inside the hole region: the
//! nominal cross-section inflated by the clearance `c` (Minkowski sum with a
//! disc of radius `c`, evaluated per point as `signed_distance <= c`). The
//! partial environments (line wall, corner wall, U wall) keep the same region
//! but only enforce a subset of its boundary sides, so a pose that fits the
//! full hole fits every partial environment as well.
//!
//! Containment decisions are exact up to floating-point rounding: polygonal
//! sections are decided at their vertices (the maximum of a convex function
//! over a polygon is attained at a vertex), and smooth sections refine the
//! sampled boundary maxima with a local parametric search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default hole clearance in mm.
pub const DEFAULT_CLEARANCE_MM: f64 = 3.0;
/// Default number of boundary samples cached per cross-section.
pub const DEFAULT_BOUNDARY_SAMPLES: usize = 256;
/// Weight converting degrees of yaw error into mm-equivalent scalar error.
pub const SCALAR_ERROR_DEG_WEIGHT: f64 = 0.5;
/// Contact clustering radius in mm: a violating boundary point within this
/// distance of a deeper violator merges into that violator's contact.
pub const CONTACT_CLUSTER_RADIUS_MM: f64 = 2.0;
/// Violations smaller than this are treated as touching, not blocking.
const VIOLATION_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("dimension must be positive and finite, got {0}")]
    NonPositiveDimension(f64),
    #[error("ellipse semi-major axis must be >= semi-minor axis")]
    EllipseAxisOrder,
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not strictly convex")]
    NonConvexPolygon,
    #[error("polygon has more vertices ({0}) than the boundary sample budget ({1})")]
    TooManyVertices(usize, usize),
    #[error("characteristic width {0:.3} mm outside the supported [20, 60] mm range")]
    WidthOutOfRange(f64),
    #[error("clearance must be positive, got {0}")]
    NonPositiveClearance(f64),
}

/// 2-D vector / point in mm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            Vec2::new(1.0, 0.0)
        }
    }

    /// 2-D cross product (z component).
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }
}

/// Planar rotation as a cached (cos, sin) pair.
#[derive(Clone, Copy, Debug)]
pub struct Rot2 {
    pub c: f64,
    pub s: f64,
}

impl Rot2 {
    pub fn from_degrees(deg: f64) -> Self {
        let r = deg.to_radians();
        Self { c: r.cos(), s: r.sin() }
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.c * v.x - self.s * v.y, self.s * v.x + self.c * v.y)
    }

    pub fn inverse(self) -> Rot2 {
        Rot2 { c: self.c, s: -self.s }
    }
}

/// Shape parameters of a convex cross-section, lengths in mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SectionKind {
    Circle { radius: f64 },
    /// Axis-aligned ellipse, `semi_major` along x, `semi_minor` along y.
    Ellipse { semi_major: f64, semi_minor: f64 },
    /// Regular hexagon with a vertex on the +x axis.
    RegularHexagon { circumradius: f64 },
    Rectangle { width: f64, height: f64 },
    /// Strictly convex polygon, vertices counter-clockwise, centroid near origin.
    ConvexPolygon { vertices: Vec<Vec2> },
}

/// A convex 2-D object footprint with a cached boundary sampling.
///
/// Invariants: the shape is convex with its centroid at the origin, every
/// cached point lies on the analytic boundary, and the characteristic width
/// (circumscribed diameter) is within [20, 60] mm.
#[derive(Clone, Debug)]
pub struct CrossSection {
    kind: SectionKind,
    boundary: Vec<Vec2>,
    /// For polygonal kinds: vertices, in order. Empty for smooth kinds.
    vertices: Vec<Vec2>,
}

impl CrossSection {
    /// Builds a cross-section with `DEFAULT_BOUNDARY_SAMPLES` boundary points.
    pub fn new(kind: SectionKind) -> Result<Self, GeometryError> {
        Self::with_samples(kind, DEFAULT_BOUNDARY_SAMPLES)
    }

    pub fn circle(radius: f64) -> Result<Self, GeometryError> {
        Self::new(SectionKind::Circle { radius })
    }

    pub fn ellipse(semi_major: f64, semi_minor: f64) -> Result<Self, GeometryError> {
        Self::new(SectionKind::Ellipse { semi_major, semi_minor })
    }

    pub fn regular_hexagon(circumradius: f64) -> Result<Self, GeometryError> {
        Self::new(SectionKind::RegularHexagon { circumradius })
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::new(SectionKind::Rectangle { width, height })
    }

    pub fn convex_polygon(vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        Self::new(SectionKind::ConvexPolygon { vertices })
    }

    /// Builds a cross-section with an explicit boundary sample budget.
    pub fn with_samples(kind: SectionKind, samples: usize) -> Result<Self, GeometryError> {
        let check_dim = |d: f64| {
            if d.is_finite() && d > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::NonPositiveDimension(d))
            }
        };
        let vertices = match &kind {
            SectionKind::Circle { radius } => {
                check_dim(*radius)?;
                Vec::new()
            }
            SectionKind::Ellipse { semi_major, semi_minor } => {
                check_dim(*semi_major)?;
                check_dim(*semi_minor)?;
                if semi_major < semi_minor {
                    return Err(GeometryError::EllipseAxisOrder);
                }
                Vec::new()
            }
            SectionKind::RegularHexagon { circumradius } => {
                check_dim(*circumradius)?;
                (0..6)
                    .map(|i| {
                        let a = std::f64::consts::PI / 3.0 * i as f64;
                        Vec2::new(circumradius * a.cos(), circumradius * a.sin())
                    })
                    .collect()
            }
            SectionKind::Rectangle { width, height } => {
                check_dim(*width)?;
                check_dim(*height)?;
                let (hw, hh) = (width / 2.0, height / 2.0);
                vec![
                    Vec2::new(hw, hh),
                    Vec2::new(-hw, hh),
                    Vec2::new(-hw, -hh),
                    Vec2::new(hw, -hh),
                ]
            }
            SectionKind::ConvexPolygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(GeometryError::TooFewVertices(vertices.len()));
                }
                for v in vertices {
                    check_dim(v.x.abs().max(v.y.abs()).max(f64::MIN_POSITIVE))?;
                    if !v.x.is_finite() || !v.y.is_finite() {
                        return Err(GeometryError::NonPositiveDimension(f64::NAN));
                    }
                }
                let vs = ccw_order(vertices.clone());
                let n = vs.len();
                for i in 0..n {
                    let a = vs[i];
                    let b = vs[(i + 1) % n];
                    let c = vs[(i + 2) % n];
                    if b.sub(a).cross(c.sub(b)) <= 0.0 {
                        return Err(GeometryError::NonConvexPolygon);
                    }
                }
                vs
            }
        };
        if !vertices.is_empty() && vertices.len() > samples {
            return Err(GeometryError::TooManyVertices(vertices.len(), samples));
        }
        let boundary = match &kind {
            SectionKind::Circle { radius } => sample_parametric(samples, |t| {
                Vec2::new(radius * t.cos(), radius * t.sin())
            }),
            SectionKind::Ellipse { semi_major, semi_minor } => sample_parametric(samples, |t| {
                Vec2::new(semi_major * t.cos(), semi_minor * t.sin())
            }),
            _ => sample_polygon(&vertices, samples),
        };
        let section = Self { kind, boundary, vertices };
        let w = section.characteristic_width();
        if !(20.0..=60.0).contains(&w) {
            return Err(GeometryError::WidthOutOfRange(w));
        }
        Ok(section)
    }

    pub fn kind(&self) -> &SectionKind {
        &self.kind
    }

    /// Boundary samples in the object frame, mm.
    pub fn boundary(&self) -> &[Vec2] {
        &self.boundary
    }

    /// Circumscribed diameter in mm.
    pub fn characteristic_width(&self) -> f64 {
        2.0 * self
            .boundary
            .iter()
            .map(|p| p.norm())
            .fold(0.0f64, f64::max)
    }

    /// Signed distance from `p` to this section's region (negative inside).
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        self.sd_dir(p).0
    }

    /// Signed distance plus the outward normal direction at the closest
    /// boundary point.
    pub fn sd_dir(&self, p: Vec2) -> (f64, Vec2) {
        match &self.kind {
            SectionKind::Circle { radius } => {
                let n = p.norm();
                (n - radius, p.normalized())
            }
            SectionKind::Ellipse { semi_major, semi_minor } => {
                ellipse_sd_dir(*semi_major, *semi_minor, p)
            }
            SectionKind::Rectangle { width, height } => rect_sd_dir(*width, *height, p),
            _ => polygon_sd_dir(&self.vertices, p),
        }
    }

    /// Point on the analytic boundary at parameter `t` in [0, 2pi) for smooth
    /// kinds; only used by the containment refinement.
    fn parametric_point(&self, t: f64) -> Vec2 {
        match &self.kind {
            SectionKind::Circle { radius } => Vec2::new(radius * t.cos(), radius * t.sin()),
            SectionKind::Ellipse { semi_major, semi_minor } => {
                Vec2::new(semi_major * t.cos(), semi_minor * t.sin())
            }
            _ => unreachable!("parametric refinement is only defined for smooth sections"),
        }
    }

    fn is_smooth(&self) -> bool {
        matches!(
            self.kind,
            SectionKind::Circle { .. } | SectionKind::Ellipse { .. }
        )
    }
}

fn sample_parametric(n: usize, f: impl Fn(f64) -> Vec2) -> Vec<Vec2> {
    (0..n)
        .map(|i| f(2.0 * std::f64::consts::PI * i as f64 / n as f64))
        .collect()
}

/// Distributes `n` samples over the polygon's edges proportionally to edge
/// length. Every vertex is always included so that vertex-attained maxima are
/// represented exactly in the sampling.
fn sample_polygon(vertices: &[Vec2], n: usize) -> Vec<Vec2> {
    let m = vertices.len();
    let lens: Vec<f64> = (0..m)
        .map(|i| vertices[i].dist(vertices[(i + 1) % m]))
        .collect();
    let perimeter: f64 = lens.iter().sum();
    // One slot per vertex, the rest split by largest remainder on edge length.
    let extra = n - m;
    let quotas: Vec<f64> = lens.iter().map(|l| extra as f64 * l / perimeter).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        (quotas[b] - quotas[b].floor())
            .partial_cmp(&(quotas[a] - quotas[a].floor()))
            .unwrap()
    });
    let mut k = 0;
    while assigned < extra {
        counts[order[k % m]] += 1;
        assigned += 1;
        k += 1;
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..m {
        let a = vertices[i];
        let b = vertices[(i + 1) % m];
        let steps = counts[i] + 1;
        for j in 0..steps {
            let t = j as f64 / steps as f64;
            out.push(Vec2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
        }
    }
    out
}

fn ccw_order(mut vs: Vec<Vec2>) -> Vec<Vec2> {
    let area: f64 = (0..vs.len())
        .map(|i| vs[i].cross(vs[(i + 1) % vs.len()]))
        .sum();
    if area < 0.0 {
        vs.reverse();
    }
    vs
}

fn rect_sd_dir(width: f64, height: f64, p: Vec2) -> (f64, Vec2) {
    let (hw, hh) = (width / 2.0, height / 2.0);
    let dx = p.x.abs() - hw;
    let dy = p.y.abs() - hh;
    if dx > 0.0 || dy > 0.0 {
        let cx = p.x.clamp(-hw, hw);
        let cy = p.y.clamp(-hh, hh);
        let d = p.sub(Vec2::new(cx, cy));
        (d.norm(), d.normalized())
    } else if dx >= dy {
        (dx, Vec2::new(p.x.signum(), 0.0))
    } else {
        (dy, Vec2::new(0.0, p.y.signum()))
    }
}

fn polygon_sd_dir(vertices: &[Vec2], p: Vec2) -> (f64, Vec2) {
    let m = vertices.len();
    let mut inside = true;
    let mut best_plane = f64::NEG_INFINITY; // max of signed plane distances
    let mut best_plane_normal = Vec2::new(1.0, 0.0);
    let mut best_dist = f64::INFINITY;
    let mut best_point = vertices[0];
    for i in 0..m {
        let a = vertices[i];
        let b = vertices[(i + 1) % m];
        let edge = b.sub(a);
        let normal = Vec2::new(edge.y, -edge.x).normalized(); // outward for CCW
        let plane = p.sub(a).dot(normal);
        if plane > 0.0 {
            inside = false;
        }
        if plane > best_plane {
            best_plane = plane;
            best_plane_normal = normal;
        }
        // Closest point on the segment.
        let t = (p.sub(a).dot(edge) / edge.norm_sq()).clamp(0.0, 1.0);
        let q = Vec2::new(a.x + edge.x * t, a.y + edge.y * t);
        let d = p.dist(q);
        if d < best_dist {
            best_dist = d;
            best_point = q;
        }
    }
    if inside {
        (best_plane, best_plane_normal)
    } else {
        let dir = p.sub(best_point);
        let dir = if dir.norm() > 1e-12 {
            dir.normalized()
        } else {
            best_plane_normal
        };
        (best_dist, dir)
    }
}

/// Distance from a point to an axis-aligned ellipse boundary, with the
/// outward normal at the closest point. Bisection on the standard root
/// function keeps this robust for interior and exterior queries alike.
fn ellipse_sd_dir(a: f64, b: f64, p: Vec2) -> (f64, Vec2) {
    debug_assert!(a >= b && b > 0.0);
    let u = p.x.abs();
    let v = p.y.abs();
    let closest_q1 = ellipse_closest_first_quadrant(a, b, u, v);
    let closest = Vec2::new(closest_q1.x.copysign(p.x), closest_q1.y.copysign(p.y));
    let inside = (p.x / a).powi(2) + (p.y / b).powi(2) < 1.0;
    let d = p.dist(closest);
    let normal = Vec2::new(closest.x / (a * a), closest.y / (b * b)).normalized();
    if inside {
        (-d, normal)
    } else {
        (d, normal)
    }
}

fn ellipse_closest_first_quadrant(a: f64, b: f64, u: f64, v: f64) -> Vec2 {
    if v <= 1e-300 {
        // On the major axis: inside the evolute the closest point is off-axis.
        let crit = (a * a - b * b) / a;
        if u < crit {
            let cx = a * a * u / (a * a - b * b);
            let cy = b * (1.0 - (cx / a).powi(2)).max(0.0).sqrt();
            return Vec2::new(cx, cy);
        }
        return Vec2::new(a, 0.0);
    }
    if u <= 1e-300 {
        return Vec2::new(0.0, b);
    }
    // Root of F(t) = (a u / (t + a^2))^2 + (b v / (t + b^2))^2 - 1 on
    // (-b^2, inf); F is strictly decreasing there.
    let f = |t: f64| (a * u / (t + a * a)).powi(2) + (b * v / (t + b * b)).powi(2) - 1.0;
    let mut lo = -b * b + b * v; // F(lo) >= 0
    let mut hi = -b * b + (a * u).hypot(b * v);
    while f(hi) > 0.0 {
        hi = -b * b + 2.0 * (hi + b * b);
    }
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Vec2::new(
        (a * a * u / (t + a * a)).min(a),
        (b * b * v / (t + b * b)).min(b),
    )
}

/// Hidden true misalignment between object and hole: translation in mm,
/// rotation in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub ex: f64,
    pub ey: f64,
    pub etheta: f64,
}

impl PoseError {
    pub const fn new(ex: f64, ey: f64, etheta: f64) -> Self {
        Self { ex, ey, etheta }
    }

    /// mm-equivalent scalar error `|ex| + |ey| + 0.5 * |etheta|`.
    pub fn scalar(&self) -> f64 {
        scalar_error(self)
    }
}

/// Scalarizes a pose error: translation in mm plus yaw at 0.5 mm per degree,
/// so the +-10 deg training range weighs like a 5 mm translation.
pub fn scalar_error(pose: &PoseError) -> f64 {
    pose.ex.abs() + pose.ey.abs() + SCALAR_ERROR_DEG_WEIGHT * pose.etheta.abs()
}

/// The four insertion environments, ordered by constraint count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvKind {
    LineWall,
    CornerWall,
    UWall,
    Hole,
}

impl EnvKind {
    pub const ALL: [EnvKind; 4] = [
        EnvKind::LineWall,
        EnvKind::CornerWall,
        EnvKind::UWall,
        EnvKind::Hole,
    ];

    pub fn constraint_count(self) -> usize {
        self.active_sides().len()
    }

    /// Boundary sides physically present in this environment.
    pub fn active_sides(self) -> &'static [Side] {
        match self {
            EnvKind::LineWall => &[Side::NegY],
            EnvKind::CornerWall => &[Side::NegY, Side::NegX],
            EnvKind::UWall => &[Side::NegY, Side::NegX, Side::PosX],
            EnvKind::Hole => &[Side::NegY, Side::NegX, Side::PosX, Side::PosY],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnvKind::LineWall => "line-wall",
            EnvKind::CornerWall => "corner-wall",
            EnvKind::UWall => "u-wall",
            EnvKind::Hole => "hole",
        }
    }
}

/// A boundary side of the hole region, classified by the dominant axis of the
/// outward normal at the violated boundary point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    NegY,
    NegX,
    PosX,
    PosY,
}

impl Side {
    pub fn classify(dir: Vec2) -> Side {
        if dir.y.abs() >= dir.x.abs() {
            if dir.y < 0.0 {
                Side::NegY
            } else {
                Side::PosY
            }
        } else if dir.x < 0.0 {
            Side::NegX
        } else {
            Side::PosX
        }
    }
}

/// An insertion environment: a nominal cross-section whose region, inflated
/// by `clearance`, forms the hole, with a subset of boundary sides active.
#[derive(Clone, Debug)]
pub struct EnvironmentSpec {
    pub kind: EnvKind,
    pub nominal_shape: CrossSection,
    pub clearance: f64,
}

impl EnvironmentSpec {
    pub fn new(
        kind: EnvKind,
        nominal_shape: CrossSection,
        clearance: f64,
    ) -> Result<Self, GeometryError> {
        if !(clearance.is_finite() && clearance > 0.0) {
            return Err(GeometryError::NonPositiveClearance(clearance));
        }
        Ok(Self { kind, nominal_shape, clearance })
    }

    pub fn active_sides(&self) -> &'static [Side] {
        self.kind.active_sides()
    }
}

/// One contact between the object boundary and an active environment side.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Contact {
    /// Location in the hole frame, mm.
    pub point: Vec2,
    /// Effective force application point of this contact relative to the
    /// grip axis: the depth-weighted centroid of the whole violating patch,
    /// so a flush face reads mid-face while a corner poke reads at the
    /// corner. Hole-frame offset from the commanded position, mm.
    pub point_obj: Vec2,
    /// Penetration beyond the clearance, mm (> 0).
    pub depth: f64,
    /// Outward unit normal of the violated constraint.
    pub normal: Vec2,
    /// Which environment side was violated.
    pub side: Side,
}

/// Result of an insertion attempt test.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ContactResult {
    pub fits: bool,
    pub contacts: Vec<Contact>,
    pub max_depth: f64,
}

struct Violation {
    q: Vec2,
    depth: f64,
    dir: Vec2,
    side: Side,
}

/// Tests whether `shape`, transformed by `pose`, fits the environment, and
/// extracts clustered contact points when it does not.
pub fn check_insertion(
    shape: &CrossSection,
    pose: &PoseError,
    env: &EnvironmentSpec,
) -> ContactResult {
    let rot = Rot2::from_degrees(pose.etheta);
    let t = Vec2::new(pose.ex, pose.ey);
    let active = env.active_sides();
    let is_circle = matches!(shape.kind, SectionKind::Circle { .. });

    // A circle's transformed boundary is the same point set for any rotation;
    // skipping the rotation keeps containment exactly yaw-invariant.
    let world = |b: Vec2| if is_circle { b.add(t) } else { rot.apply(b).add(t) };

    let evaluate = |q: Vec2| -> Option<Violation> {
        let (sd, dir) = env.nominal_shape.sd_dir(q);
        let depth = sd - env.clearance;
        if depth <= VIOLATION_EPS {
            return None;
        }
        let side = Side::classify(dir);
        if !active.contains(&side) {
            return None;
        }
        Some(Violation { q, depth, dir, side })
    };

    let boundary = shape.boundary();
    let n = boundary.len();
    let mut violations: Vec<Violation> = Vec::new();
    let mut sds: Vec<f64> = Vec::with_capacity(n);
    let mut sides: Vec<Side> = Vec::with_capacity(n);
    for b in boundary {
        let q = world(*b);
        let (sd, dir) = env.nominal_shape.sd_dir(q);
        sds.push(sd);
        sides.push(Side::classify(dir));
        if let Some(v) = evaluate(q) {
            violations.push(v);
        }
    }
    let near_threshold = |sd: f64| sd > env.clearance - 0.5;

    // Smooth boundaries can hide a shallow maximum between samples; refine
    // every local maximum of the signed distance with a parametric search so
    // the fits decision does not depend on the sample count.
    if shape.is_smooth() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let step = two_pi / n as f64;
        for i in 0..n {
            let prev = sds[(i + n - 1) % n];
            let next = sds[(i + 1) % n];
            if sds[i] >= prev && sds[i] >= next && near_threshold(sds[i]) {
                let center = step * i as f64;
                let g = |t: f64| env.nominal_shape.signed_distance(world(shape.parametric_point(t)));
                let mut lo = center - step;
                let mut hi = center + step;
                for _ in 0..70 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if g(m1) < g(m2) {
                        lo = m1;
                    } else {
                        hi = m2;
                    }
                }
                let t_max = 0.5 * (lo + hi);
                if let Some(v) = evaluate(world(shape.parametric_point(t_max))) {
                    violations.push(v);
                }
            }
        }
    }

    // A side's masked maximum can also sit where the violated-side
    // classification flips between two samples (the signed distance need not
    // have a local maximum there). Bisect each side crossing and evaluate
    // both flanks of the crossing point.
    let point_at = |i: usize, t: f64| -> Vec2 {
        if shape.is_smooth() {
            let two_pi = 2.0 * std::f64::consts::PI;
            let step = two_pi / n as f64;
            world(shape.parametric_point(step * (i as f64 + t)))
        } else {
            // Adjacent polygon samples share an edge (all vertices are
            // sampled), so the chord between them lies on the boundary.
            let a = boundary[i];
            let b = boundary[(i + 1) % n];
            world(Vec2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t))
        }
    };
    for i in 0..n {
        let j = (i + 1) % n;
        if sides[i] == sides[j] || !near_threshold(sds[i].max(sds[j])) {
            continue;
        }
        let side_of = |t: f64| Side::classify(env.nominal_shape.sd_dir(point_at(i, t)).1);
        let left = sides[i];
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if side_of(mid) == left {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for t in [lo, hi] {
            if let Some(v) = evaluate(point_at(i, t)) {
                violations.push(v);
            }
        }
    }

    if violations.is_empty() {
        return ContactResult { fits: true, contacts: Vec::new(), max_depth: 0.0 };
    }

    // Single-linkage clustering, deepest first: a violation joins a contact
    // when it lies within the cluster radius of any of its members, so a
    // flush face collapses to one contact while interlocked corners stay
    // separate.
    violations.sort_by(|a, b| b.depth.partial_cmp(&a.depth).unwrap());
    let mut contacts: Vec<Contact> = Vec::new();
    let mut members: Vec<Vec<(Vec2, f64)>> = Vec::new();
    for v in &violations {
        let near: Vec<usize> = (0..contacts.len())
            .filter(|&ci| {
                members[ci]
                    .iter()
                    .any(|(m, _)| m.dist(v.q) <= CONTACT_CLUSTER_RADIUS_MM)
            })
            .collect();
        match near.split_first() {
            None => {
                contacts.push(Contact {
                    point: v.q,
                    point_obj: Vec2::default(),
                    depth: v.depth,
                    normal: v.dir,
                    side: v.side,
                });
                members.push(vec![(v.q, v.depth)]);
            }
            Some((&keep, rest)) => {
                members[keep].push((v.q, v.depth));
                // A point touching several clusters links them; keep the
                // deepest seed (contacts are in descending depth order).
                for &ci in rest.iter().rev() {
                    let merged = members.remove(ci);
                    members[keep].extend(merged);
                    contacts.remove(ci);
                }
            }
        }
    }
    for (contact, ms) in contacts.iter_mut().zip(&members) {
        let w: f64 = ms.iter().map(|(_, d)| d).sum();
        let mut c = Vec2::default();
        for (q, d) in ms {
            c = c.add(q.sub(t).scale(d / w));
        }
        contact.point_obj = c;
    }
    let max_depth = contacts[0].depth;
    ContactResult { fits: false, contacts, max_depth }
}

/// Convenience constructor used by `make_cross_section`-style call sites.
pub fn make_cross_section(kind: SectionKind) -> Result<CrossSection, GeometryError> {
    CrossSection::new(kind)
}
