use std::sync::Arc;

use proptest::prelude::*;
use schwarz_core::extremal_solver::{moments_ri, ProblemSpec};
use schwarz_core::schwarz_bounds::{classical_bound, region_envelope, DirectionScheme, directional_bound};
use schwarz_core::sphere_quadrature::QuadratureRule;
use schwarz_core::verification_oracle::jacobian_fd_check;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn jacobian_matches_finite_differences(
        n in 2usize..5,
        r in 0.1f64..0.9,
        lambda in prop::collection::vec(-1.0f64..2.0, 1..4),
        mu in 0.2f64..3.0,
    ) {
        let m = lambda.len();
        let spec = ProblemSpec::new(n, m, r, vec![0.0; m], 0.1).unwrap();
        let rule = QuadratureRule::new(n, 256).unwrap();
        let err = jacobian_fd_check(&spec, &lambda, mu, &rule, 1e-6).unwrap();
        prop_assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn first_moment_decreases_in_lambda1(
        n in 2usize..5,
        r in 0.1f64..0.9,
        l1 in -1.0f64..2.0,
        step in 0.01f64..0.5,
        tail in -1.0f64..1.0,
        mu in 0.2f64..3.0,
    ) {
        let spec = ProblemSpec::new(n, 2, r, vec![0.0, 0.0], 0.1).unwrap();
        let rule = QuadratureRule::new(n, 256).unwrap();
        let (lo, _) = moments_ri(&spec, &[l1, tail], mu, &rule).unwrap();
        let (hi, _) = moments_ri(&spec, &[l1 + step, tail], mu, &rule).unwrap();
        prop_assert!(hi[0] < lo[0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn origin_bound_is_direction_free(n in 2usize..5, r in 0.1f64..0.9, seed in any::<u64>()) {
        let rule = Arc::new(QuadratureRule::new(n, 256).unwrap());
        let spec = ProblemSpec::new(n, 1, r, vec![0.0], 0.0).unwrap();
        let classical = classical_bound(n, r, &rule).unwrap();
        let dirs = DirectionScheme::Random { count: 1, seed }.directions(2).unwrap();
        let h = directional_bound(&spec, &dirs[0], rule).unwrap().value;
        prop_assert!((h - classical).abs() < 1e-9, "{h} vs {classical}");
    }

    #[test]
    fn region_envelope_is_deterministic(
        n in 2usize..4,
        r in 0.2f64..0.8,
        a in -0.4f64..0.4,
        b in -0.4f64..0.4,
        seed in any::<u64>(),
    ) {
        let rule = Arc::new(QuadratureRule::new(n, 128).unwrap());
        let spec = ProblemSpec::new(n, 2, r, vec![a, 0.1], b).unwrap();
        let scheme = DirectionScheme::Random { count: 8, seed };
        let first = region_envelope(&spec, &scheme, rule.clone()).unwrap().to_json();
        let second = region_envelope(&spec, &scheme, rule).unwrap().to_json();
        prop_assert_eq!(first, second);
    }
}

#[test]
fn angular_envelope_at_origin_is_a_circle() {
    let n = 3;
    let r = 0.5;
    let rule = Arc::new(QuadratureRule::new(n, 256).unwrap());
    let spec = ProblemSpec::new(n, 1, r, vec![0.0], 0.0).unwrap();
    let classical = classical_bound(n, r, &rule).unwrap();
    let env = region_envelope(&spec, &DirectionScheme::Angular { count: 360 }, rule).unwrap();
    assert_eq!(env.halfspaces.len(), 360);
    for hs in &env.halfspaces {
        assert!((hs.h - classical).abs() < 1e-9, "h = {} at e = {:?}", hs.h, hs.e);
    }
}
