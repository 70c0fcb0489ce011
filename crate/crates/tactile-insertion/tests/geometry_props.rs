//! Property tests for the containment geometry.

mod common;

use proptest::prelude::*;
use tactile_insertion::geometry::{
    check_insertion, scalar_error, CrossSection, EnvKind, EnvironmentSpec, PoseError,
};
use tactile_insertion::util::derive_rng;

fn env(kind: EnvKind, shape: &CrossSection, clearance: f64) -> EnvironmentSpec {
    EnvironmentSpec::new(kind, shape.clone(), clearance).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Active constraints nest: a pose that fits the hole fits every
    /// partial environment of the same shape.
    #[test]
    fn constraint_nesting(
        seed in 0u64..10_000,
        ex in -8.0f64..8.0,
        ey in -8.0f64..8.0,
        th in -15.0f64..15.0,
        clearance in 1.0f64..3.5,
    ) {
        let shape = common::random_section(&mut derive_rng(seed, &[70]));
        let pose = PoseError::new(ex, ey, th);
        let fits: Vec<bool> = EnvKind::ALL
            .iter()
            .map(|&k| check_insertion(&shape, &pose, &env(k, &shape, clearance)).fits)
            .collect();
        // ALL is ordered line -> corner -> U -> hole by constraint count.
        prop_assert!(!fits[3] || fits[2]);
        prop_assert!(!fits[2] || fits[1]);
        prop_assert!(!fits[1] || fits[0]);
    }

    /// For a circle in its matched hole, fitting is monotone in the
    /// translation magnitude.
    #[test]
    fn circle_translation_monotonicity(
        radius in 11.0f64..25.0,
        direction in 0.0f64..std::f64::consts::TAU,
        t_outer in 0.0f64..8.0,
        shrink in 0.0f64..1.0,
        th in -15.0f64..15.0,
        clearance in 1.0f64..3.5,
    ) {
        let shape = CrossSection::circle(radius).unwrap();
        let hole = env(EnvKind::Hole, &shape, clearance);
        let pose_at = |t: f64| PoseError::new(t * direction.cos(), t * direction.sin(), th);
        let outer_fits = check_insertion(&shape, &pose_at(t_outer), &hole).fits;
        let inner_fits = check_insertion(&shape, &pose_at(t_outer * shrink), &hole).fits;
        prop_assert!(!outer_fits || inner_fits);
    }

    /// The scalarized error is absolutely homogeneous and vanishes only at
    /// zero misalignment.
    #[test]
    fn scalar_error_is_a_weighted_norm(
        ex in -12.0f64..12.0,
        ey in -12.0f64..12.0,
        th in -15.0f64..15.0,
        scale in 0.0f64..2.0,
    ) {
        let e = PoseError::new(ex, ey, th);
        let scaled = PoseError::new(scale * ex, scale * ey, scale * th);
        prop_assert!(scalar_error(&e) >= 0.0);
        prop_assert!((scalar_error(&scaled) - scale * scalar_error(&e)).abs() < 1e-9);
        let negated = PoseError::new(-ex, -ey, -th);
        prop_assert!((scalar_error(&negated) - scalar_error(&e)).abs() < 1e-12);
    }

    /// Contact invariants: depths positive, normals unit length, fits is
    /// equivalent to an empty contact set and a zero max depth.
    #[test]
    fn contact_result_invariants(
        seed in 0u64..10_000,
        ex in -8.0f64..8.0,
        ey in -8.0f64..8.0,
        th in -15.0f64..15.0,
        clearance in 1.0f64..3.5,
    ) {
        let shape = common::random_section(&mut derive_rng(seed, &[71]));
        let kind = common::random_env_kind(&mut derive_rng(seed, &[72]));
        let r = check_insertion(&shape, &PoseError::new(ex, ey, th), &env(kind, &shape, clearance));
        prop_assert_eq!(r.fits, r.contacts.is_empty());
        prop_assert_eq!(r.fits, r.max_depth == 0.0);
        for c in &r.contacts {
            prop_assert!(c.depth > 0.0);
            prop_assert!((c.normal.norm() - 1.0).abs() < 1e-9);
            prop_assert!(c.depth <= r.max_depth + 1e-12);
        }
    }
}
