use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use schwarz_core::sphere_quadrature::{
    axial_poisson_kernel, kernel_breakpoints, poisson_kernel, sample_sphere, zonal_integrate, QuadratureRule,
};

#[test]
fn poisson_kernel_is_a_probability_density() {
    let radii = [0.05, 0.3, 0.6, 0.9, 0.99];
    for n in 2..=5 {
        let rule = QuadratureRule::new(n, 512).unwrap();
        for &rho in &radii {
            let mass = zonal_integrate(&rule, |t| axial_poisson_kernel(rho, t, n), &kernel_breakpoints(rho)).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "n = {n}, ρ = {rho}: mass {mass}");
            for k in 0..=20 {
                let t = -1.0 + 0.1 * k as f64;
                assert!(axial_poisson_kernel(rho, t, n) > 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn poisson_kernel_is_positive_inside(
        (x, seed) in (2usize..6).prop_flat_map(|n| (prop::collection::vec(-0.5f64..0.5, n), any::<u64>()))
    ) {
        let omega = &sample_sphere(x.len(), 1, seed).unwrap()[0];
        prop_assert!(poisson_kernel(&x, omega).unwrap() > 0.0);
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature(n in 2usize..6, k in 1i32..5, seed in any::<u64>()) {
        // zonal polynomial t^k + t^2 under a uniform measure
        let f = |t: f64| t.powi(k) + t * t;
        let rule = QuadratureRule::new(n, 64).unwrap();
        let exact = zonal_integrate(&rule, f, &[]).unwrap();

        let count = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..count)
            .map(|_| {
                let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
                f(v[0] / norm)
            })
            .collect();
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64;
        let se = (var / count as f64).sqrt();
        // 5 standard errors keeps the false-alarm rate negligible across cases
        prop_assert!((mean - exact).abs() <= 5.0 * se + 1e-12, "mean {mean}, exact {exact}, se {se}");
    }
}

#[test]
fn monte_carlo_within_three_standard_errors_for_fixed_seeds() {
    let n = 3;
    let rule = QuadratureRule::new(n, 128).unwrap();
    let rho = 0.4;
    let f = |t: f64| axial_poisson_kernel(rho, t, n) * t;
    let exact = zonal_integrate(&rule, f, &[]).unwrap();
    let mut hits = 0;
    for seed in 0..20 {
        let pts = sample_sphere(n, 5000, seed).unwrap();
        let values: Vec<f64> = pts.iter().map(|p| f(p[0])).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
        let se = (var / values.len() as f64).sqrt();
        if (mean - exact).abs() <= 3.0 * se {
            hits += 1;
        }
    }
    // about 99.7% coverage; allow one miss in twenty
    assert!(hits >= 19, "{hits} of 20 seeds within 3 se");
}
