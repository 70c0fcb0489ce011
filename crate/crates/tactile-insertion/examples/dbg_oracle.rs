// Debug harness: replicates the acceptance case generator and dumps the
// geometry of impl-vs-oracle disagreements.
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tactile_insertion::geometry::*;
use tactile_insertion::util::derive_rng;

fn random_convex_polygon(rng: &mut ChaCha8Rng) -> SectionKind {
    let sides = rng.random_range(5..9usize);
    let mut angles: Vec<f64> = (0..sides)
        .map(|i| 2.0*std::f64::consts::PI*i as f64/sides as f64 + rng.random_range(-0.15..0.15)).collect();
    angles.sort_by(|a,b| a.partial_cmp(b).unwrap());
    let base: f64 = rng.random_range(14.0..22.0);
    SectionKind::ConvexPolygon{ vertices: angles.iter().map(|a| Vec2::new(base*a.cos(), base*a.sin())).collect() }
}
fn random_section(rng: &mut ChaCha8Rng) -> CrossSection {
    loop {
        let kind = match rng.random_range(0..5u8) {
            0 => SectionKind::Circle{ radius: rng.random_range(11.0..25.0) },
            1 => { let b: f64 = rng.random_range(10.0..18.0); let a: f64 = b + rng.random_range(0.5..10.0);
                   SectionKind::Ellipse{ semi_major: a, semi_minor: b } },
            2 => SectionKind::RegularHexagon{ circumradius: rng.random_range(11.0..25.0) },
            3 => SectionKind::Rectangle{ width: rng.random_range(22.0..50.0), height: rng.random_range(20.0..34.0) },
            _ => random_convex_polygon(rng),
        };
        if let Ok(s) = CrossSection::new(kind) { return s; }
    }
}

fn main() {
    let mut rng = derive_rng(0xacce97, &[1]);
    for case in 0..10000 {
        let shape = random_section(&mut rng);
        let pose = PoseError::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), rng.random_range(-15.0..15.0));
        let kind = EnvKind::ALL[rng.random_range(0..4usize)];
        let clearance = rng.random_range(1.0..3.5);
        if case != 85 { continue; }
        let env = EnvironmentSpec::new(kind, shape.clone(), clearance).unwrap();
        let result = check_insertion(&shape, &pose, &env);
        println!("case {case} kind={kind:?} clearance={clearance:.4} pose=({:.4},{:.4},{:.4})", pose.ex, pose.ey, pose.etheta);
        println!("shape = {:?}", shape.kind());
        println!("impl fits={} max_depth={:.6} contacts={}", result.fits, result.max_depth, result.contacts.len());
        // dense scan with the IMPL's own sd to find what the impl sees
        let rad = pose.etheta.to_radians();
        let (c, s) = (rad.cos(), rad.sin());
        let t = Vec2::new(pose.ex, pose.ey);
        let circle = matches!(shape.kind(), SectionKind::Circle{..});
        let mut worst = f64::NEG_INFINITY; let mut worst_q = Vec2::default(); let mut worst_side = Side::NegY;
        for i in 0..40000 {
            let a = 2.0*std::f64::consts::PI*(i as f64)/40000.0;
            let b = match shape.kind() {
                SectionKind::Circle{radius} => Vec2::new(radius*a.cos(), radius*a.sin()),
                SectionKind::Ellipse{semi_major, semi_minor} => Vec2::new(semi_major*a.cos(), semi_minor*a.sin()),
                _ => { // walk boundary cache segments instead
                    let bd = shape.boundary(); let n = bd.len();
                    let f = (i as f64)/40000.0 * n as f64;
                    let j = (f.floor() as usize) % n; let frac = f - f.floor();
                    let p0 = bd[j]; let p1 = bd[(j+1)%n];
                    Vec2::new(p0.x + (p1.x-p0.x)*frac, p0.y + (p1.y-p0.y)*frac)
                }
            };
            let q = if circle { b.add(t) } else { Vec2::new(c*b.x - s*b.y, s*b.x + c*b.y).add(t) };
            let (sd, dir) = env.nominal_shape.sd_dir(q);
            let viol = sd - clearance;
            let side = Side::classify(dir);
            if env.kind.active_sides().contains(&side) && viol > worst {
                worst = viol; worst_q = q; worst_side = side;
            }
        }
        println!("dense-scan (impl sd): worst active violation {worst:.6} at ({:.4},{:.4}) side {worst_side:?}", worst_q.x, worst_q.y);
        break;
    }
}
