//! Shared test oracles, independent of the library's implementation paths.
//!
//! The containment oracle re-derives boundary sampling, pose transforms,
//! signed distances and side classification from scratch (dense parametric
//! scans instead of root-finding, segment distances instead of plane
//! bookkeeping) so agreement with `check_insertion` is meaningful.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tactile_insertion::geometry::{
    CrossSection, EnvKind, EnvironmentSpec, PoseError, SectionKind, Side, Vec2,
};

pub const ORACLE_POINTS: usize = 10_000;

fn rotate(c: f64, s: f64, p: Vec2) -> Vec2 {
    Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

/// Uniform boundary sampling in the object frame, vertices included for
/// polygonal kinds.
fn boundary_points(kind: &SectionKind, n: usize) -> Vec<Vec2> {
    match kind {
        SectionKind::Circle { radius } => (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Vec2::new(radius * a.cos(), radius * a.sin())
            })
            .collect(),
        SectionKind::Ellipse { semi_major, semi_minor } => (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Vec2::new(semi_major * a.cos(), semi_minor * a.sin())
            })
            .collect(),
        _ => {
            let vs = polygon_vertices(kind);
            let m = vs.len();
            let lens: Vec<f64> = (0..m).map(|i| vs[i].dist(vs[(i + 1) % m])).collect();
            let perimeter: f64 = lens.iter().sum();
            let mut out = Vec::with_capacity(n + m);
            for i in 0..m {
                let a = vs[i];
                let b = vs[(i + 1) % m];
                let count = ((n as f64 * lens[i] / perimeter).ceil() as usize).max(1);
                for j in 0..count {
                    let t = j as f64 / count as f64;
                    out.push(Vec2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
                }
            }
            out
        }
    }
}

fn polygon_vertices(kind: &SectionKind) -> Vec<Vec2> {
    match kind {
        SectionKind::RegularHexagon { circumradius } => (0..6)
            .map(|i| {
                let a = std::f64::consts::PI / 3.0 * i as f64;
                Vec2::new(circumradius * a.cos(), circumradius * a.sin())
            })
            .collect(),
        SectionKind::Rectangle { width, height } => {
            let (hw, hh) = (width / 2.0, height / 2.0);
            vec![
                Vec2::new(hw, hh),
                Vec2::new(-hw, hh),
                Vec2::new(-hw, -hh),
                Vec2::new(hw, -hh),
            ]
        }
        SectionKind::ConvexPolygon { vertices } => vertices.clone(),
        _ => unreachable!("smooth kinds have no vertices"),
    }
}

/// Signed distance plus outward direction by brute geometry.
fn oracle_sd_dir(kind: &SectionKind, q: Vec2) -> (f64, Vec2) {
    match kind {
        SectionKind::Circle { radius } => (q.norm() - radius, q.normalized()),
        SectionKind::Ellipse { semi_major, semi_minor } => {
            ellipse_sd_dir_scan(*semi_major, *semi_minor, q)
        }
        _ => {
            let vs = polygon_vertices(kind);
            let m = vs.len();
            let mut inside = true;
            let mut best = f64::INFINITY;
            let mut best_point = vs[0];
            for i in 0..m {
                let a = vs[i];
                let b = vs[(i + 1) % m];
                let e = b.sub(a);
                if e.cross(q.sub(a)) < 0.0 {
                    inside = false;
                }
                let t = (q.sub(a).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
                let p = Vec2::new(a.x + e.x * t, a.y + e.y * t);
                let d = q.dist(p);
                if d < best {
                    best = d;
                    best_point = p;
                }
            }
            if inside {
                // Outward direction approximated from the closest edge point.
                let dir = best_point.sub(q);
                (-best, if dir.norm() > 1e-12 { dir.normalized() } else { Vec2::new(1.0, 0.0) })
            } else {
                (best, q.sub(best_point).normalized())
            }
        }
    }
}

/// Dense parametric scan plus local ternary refinement; independent of the
/// library's bisection root-finder. The scan table for one ellipse is built
/// once and shared across queries.
pub struct EllipseScan {
    a: f64,
    b: f64,
    table: Vec<Vec2>,
}

impl EllipseScan {
    pub fn new(a: f64, b: f64) -> EllipseScan {
        let n = 256;
        let table = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Vec2::new(a * t.cos(), b * t.sin())
            })
            .collect();
        EllipseScan { a, b, table }
    }

    /// Nearest table entry gives the distance with error below half the arc
    /// spacing; `refine` narrows it with a ternary search when needed.
    fn coarse(&self, q: Vec2) -> (usize, f64) {
        let mut best_i = 0;
        let mut best = f64::INFINITY;
        for (i, p) in self.table.iter().enumerate() {
            let d = p.sub(q).norm_sq();
            if d < best {
                best = d;
                best_i = i;
            }
        }
        (best_i, best.sqrt())
    }

    fn refine(&self, q: Vec2, coarse_i: usize) -> (f64, Vec2) {
        let n = self.table.len() as f64;
        let step = 2.0 * std::f64::consts::PI / n;
        let dist2 = |t: f64| {
            let p = Vec2::new(self.a * t.cos(), self.b * t.sin());
            p.sub(q).norm_sq()
        };
        let mut lo = step * (coarse_i as f64 - 1.0);
        let mut hi = step * (coarse_i as f64 + 1.0);
        for _ in 0..60 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if dist2(m1) < dist2(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let t = 0.5 * (lo + hi);
        let p = Vec2::new(self.a * t.cos(), self.b * t.sin());
        (q.dist(p), p)
    }

    /// Signed distance and outward normal, exact near `threshold` (the
    /// region where membership decisions flip) and coarse elsewhere.
    pub fn sd_dir_near(&self, q: Vec2, threshold: f64) -> (f64, Vec2) {
        let inside = (q.x / self.a).powi(2) + (q.y / self.b).powi(2) < 1.0;
        // Sharp ray bounds decide most points without a scan: the support
        // function bounds the region from outside, the ray intersection
        // from inside.
        let r = q.norm();
        if r > 1e-9 {
            let (ux, uy) = (q.x / r, q.y / r);
            let support = ((self.a * ux).powi(2) + (self.b * uy).powi(2)).sqrt();
            let t_ray = 1.0 / ((ux / self.a).powi(2) + (uy / self.b).powi(2)).sqrt();
            let upper = if inside { -(t_ray - r) } else { r - t_ray };
            if upper < threshold - 1e-6 {
                // Definitely below the threshold: the point cannot violate,
                // so an upper-bound estimate and an approximate normal are
                // enough. Potential violations fall through to the exact
                // scan because their side classification matters.
                let normal = Vec2::new(ux / self.a, uy / self.b).normalized();
                return (upper, normal);
            }
        }
        let (i, d_coarse) = self.coarse(q);
        let sd_coarse = if inside { -d_coarse } else { d_coarse };
        // Half arc spacing bounds the coarse error.
        let band = std::f64::consts::PI * self.a / self.table.len() as f64 + 1e-3;
        let (d, p) = if (sd_coarse - threshold).abs() <= band {
            self.refine(q, i)
        } else {
            (d_coarse, self.table[i])
        };
        let normal = Vec2::new(p.x / (self.a * self.a), p.y / (self.b * self.b)).normalized();
        if inside {
            (-d, normal)
        } else {
            (d, normal)
        }
    }
}

fn ellipse_sd_dir_scan(a: f64, b: f64, q: Vec2) -> (f64, Vec2) {
    let scan = EllipseScan::new(a, b);
    let (i, _) = scan.coarse(q);
    let (d, p) = scan.refine(q, i);
    let inside = (q.x / a).powi(2) + (q.y / b).powi(2) < 1.0;
    let normal = Vec2::new(p.x / (a * a), p.y / (b * b)).normalized();
    if inside {
        (-d, normal)
    } else {
        (d, normal)
    }
}

fn classify(dir: Vec2) -> Side {
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

/// Maximum violation depth against the environment's active sides over a
/// dense boundary sampling of the transformed shape; negative when no
/// active side is violated. `stop_above` allows early exit once a violation
/// that deep has been found (useful when only the sign is in question).
pub fn oracle_max_active_violation(
    shape: &CrossSection,
    pose: &PoseError,
    env: &EnvironmentSpec,
    points: usize,
    stop_above: Option<f64>,
) -> f64 {
    let rad = pose.etheta.to_radians();
    let (c, s) = (rad.cos(), rad.sin());
    let t = Vec2::new(pose.ex, pose.ey);
    let circle = matches!(shape.kind(), SectionKind::Circle { .. });
    let active = env.kind.active_sides();
    let scan = match env.nominal_shape.kind() {
        SectionKind::Ellipse { semi_major, semi_minor } => {
            Some(EllipseScan::new(*semi_major, *semi_minor))
        }
        _ => None,
    };
    let mut max = f64::NEG_INFINITY;
    for b in boundary_points(shape.kind(), points) {
        let q = if circle { b.add(t) } else { rotate(c, s, b).add(t) };
        let (sd, dir) = match &scan {
            Some(scan) => scan.sd_dir_near(q, env.clearance),
            None => oracle_sd_dir(env.nominal_shape.kind(), q),
        };
        let violation = sd - env.clearance;
        if violation > max && active.contains(&classify(dir)) {
            max = violation;
            if let Some(limit) = stop_above {
                if max > limit {
                    return max;
                }
            }
        }
    }
    max
}

/// Active-side violation depth of one point, by the oracle's geometry.
pub fn oracle_point_violation(env: &EnvironmentSpec, q: Vec2) -> f64 {
    let (sd, dir) = oracle_sd_dir(env.nominal_shape.kind(), q);
    if env.kind.active_sides().contains(&classify(dir)) {
        sd - env.clearance
    } else {
        f64::NEG_INFINITY
    }
}

/// Random convex polygon roughly 30-50 mm across.
pub fn random_convex_polygon(rng: &mut ChaCha8Rng) -> SectionKind {
    let sides = rng.random_range(5..9usize);
    let mut angles: Vec<f64> = (0..sides)
        .map(|i| {
            2.0 * std::f64::consts::PI * i as f64 / sides as f64
                + rng.random_range(-0.15..0.15)
        })
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let base: f64 = rng.random_range(14.0..22.0);
    SectionKind::ConvexPolygon {
        vertices: angles
            .iter()
            .map(|a| Vec2::new(base * a.cos(), base * a.sin()))
            .collect(),
    }
}

/// Random shape from all five kinds, sized inside the supported width band.
pub fn random_section(rng: &mut ChaCha8Rng) -> CrossSection {
    loop {
        let kind = match rng.random_range(0..5u8) {
            0 => SectionKind::Circle { radius: rng.random_range(11.0..25.0) },
            1 => {
                let b: f64 = rng.random_range(10.0..18.0);
                let a: f64 = b + rng.random_range(0.5..10.0);
                SectionKind::Ellipse { semi_major: a, semi_minor: b }
            }
            2 => SectionKind::RegularHexagon { circumradius: rng.random_range(11.0..25.0) },
            3 => SectionKind::Rectangle {
                width: rng.random_range(22.0..50.0),
                height: rng.random_range(20.0..34.0),
            },
            _ => random_convex_polygon(rng),
        };
        if let Ok(section) = CrossSection::new(kind) {
            return section;
        }
    }
}

pub fn random_env_kind(rng: &mut ChaCha8Rng) -> EnvKind {
    EnvKind::ALL[rng.random_range(0..4usize)]
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> PoseError {
    PoseError::new(
        rng.random_range(-8.0..8.0),
        rng.random_range(-8.0..8.0),
        rng.random_range(-15.0..15.0),
    )
}
