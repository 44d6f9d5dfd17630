//! Integration over the unit sphere `S^{n-1}` against the normalized surface
//! measure `σ` (so that `σ(S) = 1`), restricted to functions with symmetry.
//!
//! A *zonal* function depends on `ω` only through the latitude
//! `t = ⟨ω, N⟩`, with `N = (0, …, 0, 1)` the north pole. For such functions
//!
//! ```text
//! ∫_S f(⟨ω,N⟩) dσ(ω) = c_n ∫_{-1}^{1} f(t) (1 - t²)^{(n-3)/2} dt,
//! c_n = 1 / ∫_{-1}^{1} (1 - t²)^{(n-3)/2} dt = 1 / ∫_0^π sin^{n-2}θ dθ,
//! ```
//!
//! so every zonal integral is a one-dimensional integral against a symmetric
//! Jacobi weight. Smooth profiles use a Gauss-Jacobi rule for that weight
//! (Chebyshev for `n = 2`, Legendre for `n = 3`). Profiles with jumps are
//! integrated piecewise: the substitution `t = cos θ` turns the weight into the
//! analytic factor `sin^{n-2}θ`, and each `θ`-interval between breakpoints gets
//! its own mapped Gauss-Legendre rule.
//!
//! A *biaxial* function depends on `(t1, t2) = (⟨ω,N⟩, ⟨ω,ê⟩)` for a unit
//! `ê ⊥ N`. Writing `ω = (√(1-t1²) ξ, t1)` with `ξ ∈ S^{n-2}` and
//! `t2 = √(1-t1²) ξ_1`, the measure factors into the zonal weight of `S^{n-1}`
//! in `t1` times the zonal weight of `S^{n-2}` in `ξ_1`. This is the disk weight
//! `(1 - t1² - t2²)^{(n-4)/2}` after a change of variables, and it removes the
//! boundary singularity for `n = 3`. For `n = 2` the inner sphere is `{±1}`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SchwarzError};

/// Smallest supported ambient dimension.
pub const MIN_DIMENSION: usize = 2;
/// Largest supported ambient dimension.
pub const MAX_DIMENSION: usize = 16;
/// Node count used when the caller has no reason to pick one.
pub const DEFAULT_ORDER: usize = 512;

/// Gauss rule for the zonal reduction of `σ` on `S^{n-1}`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // Gauss-Legendre nodes/weights on [-1, 1] for piecewise integration.
    legendre_nodes: Vec<f64>,
    legendre_weights: Vec<f64>,
    // 1 / ∫_0^π sin^{n-2}θ dθ
    normalization: f64,
}

impl QuadratureRule {
    pub fn new(n: usize, order: usize) -> Result<Self> {
        check_dimension(n)?;
        if order == 0 {
            return Err(SchwarzError::domain("quadrature order must be at least 1"));
        }
        let (nodes, weights) = match n {
            2 => gauss_chebyshev(order),
            _ => gauss_gegenbauer(order, (n as f64 - 3.0) / 2.0)?,
        };
        let (legendre_nodes, legendre_weights) = gauss_gegenbauer(order, 0.0)?;
        Ok(Self {
            n,
            nodes,
            weights,
            legendre_nodes,
            legendre_weights,
            normalization: 1.0 / sine_power_integral(n - 2),
        })
    }

    pub fn with_default_order(n: usize) -> Result<Self> {
        Self::new(n, DEFAULT_ORDER)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Abscissae in `(-1, 1)`, in decreasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Positive weights summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Returns `(t, weight)` pairs realizing `∫_S f(t) dσ ≈ Σ w f(t)`.
    ///
    /// Breakpoints outside `(-1, 1)` are ignored. With no effective breakpoint
    /// this is the Gauss-Jacobi rule; otherwise each piece between consecutive
    /// breakpoints gets a full Gauss-Legendre rule in the angle `θ = acos t`.
    pub fn nodes_with_breakpoints(&self, breakpoints: &[f64]) -> Vec<(f64, f64)> {
        let mut angles: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|t| t.is_finite() && t.abs() < 1.0)
            .map(f64::acos)
            .collect();
        if angles.is_empty() {
            return self
                .nodes
                .iter()
                .copied()
                .zip(self.weights.iter().copied())
                .collect();
        }
        angles.push(0.0);
        angles.push(PI);
        angles.sort_by(|a, b| a.total_cmp(b));
        angles.dedup();

        let power = (self.n - 2) as i32;
        let mut out = Vec::with_capacity((angles.len() - 1) * self.legendre_nodes.len());
        for piece in angles.windows(2) {
            let (lo, hi) = (piece[0], piece[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            if half <= 0.0 {
                continue;
            }
            for (x, w) in self.legendre_nodes.iter().zip(&self.legendre_weights) {
                let theta = mid + half * x;
                let (sin, cos) = theta.sin_cos();
                // legendre weights sum to 1 on [-1, 1]; rescale to length 2
                let weight = 2.0 * half * w * sin.powi(power) * self.normalization;
                out.push((cos, weight));
            }
        }
        out
    }
}

/// Tensor-product rule for biaxial integrands `f(⟨ω,N⟩, ⟨ω,ê⟩)`.
#[derive(Clone, Debug)]
pub struct BiaxialRule {
    n: usize,
    outer: QuadratureRule,
    inner: Vec<(f64, f64)>,
}

impl BiaxialRule {
    /// `outer_order` nodes in the latitude `t1`, `inner_order` nodes in the
    /// second coordinate of the residual sphere (ignored for `n = 2`).
    pub fn new(n: usize, outer_order: usize, inner_order: usize) -> Result<Self> {
        let outer = QuadratureRule::new(n, outer_order)?;
        let inner = if n == 2 {
            vec![(-1.0, 0.5), (1.0, 0.5)]
        } else {
            let rule = QuadratureRule::new(n - 1, inner_order)?;
            rule.nodes
                .iter()
                .copied()
                .zip(rule.weights.iter().copied())
                .collect()
        };
        Ok(Self { n, outer, inner })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn outer(&self) -> &QuadratureRule {
        &self.outer
    }

    /// `(ξ_1, weight)` pairs on the residual sphere `S^{n-2}`.
    pub fn inner(&self) -> &[(f64, f64)] {
        &self.inner
    }

    /// Node triples `(t1, t2, weight)`; weights are positive and sum to one.
    pub fn nodes_with_breakpoints(&self, t1_breakpoints: &[f64]) -> Vec<(f64, f64, f64)> {
        let outer = self.outer.nodes_with_breakpoints(t1_breakpoints);
        let mut out = Vec::with_capacity(outer.len() * self.inner.len());
        for (t1, w1) in outer {
            let radius = (1.0 - t1 * t1).max(0.0).sqrt();
            for &(xi, w2) in &self.inner {
                out.push((t1, radius * xi, w1 * w2));
            }
        }
        out
    }
}

/// Graded breakpoints that resolve the Poisson kernel peak at `t = 1` when
/// `ρ` is close to 1. Empty for moderate `ρ`, where the smooth rule is exact
/// to machine precision.
pub fn kernel_breakpoints(rho: f64) -> Vec<f64> {
    if !(rho > 0.75 && rho < 1.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut theta = 1.0 - rho;
    while theta < 0.5 * PI {
        out.push(theta.cos());
        theta *= 4.0;
    }
    out
}

/// `∫_S f(⟨ω,N⟩) dσ` for a zonal profile `f`.
///
/// `breakpoints` must list every jump of `f` in `(-1, 1)`.
pub fn zonal_integrate<F>(rule: &QuadratureRule, profile: F, breakpoints: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut sum = 0.0;
    for (t, w) in rule.nodes_with_breakpoints(breakpoints) {
        let value = profile(t);
        if !value.is_finite() {
            return Err(SchwarzError::Integration { node: t, value });
        }
        sum += w * value;
    }
    Ok(sum)
}

/// `∫_S f(⟨ω,N⟩, ⟨ω,ê⟩) dσ` for a biaxial profile `f`.
pub fn biaxial_integrate<F>(rule: &BiaxialRule, profile: F, t1_breakpoints: &[f64]) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let mut sum = 0.0;
    for (t1, t2, w) in rule.nodes_with_breakpoints(t1_breakpoints) {
        let value = profile(t1, t2);
        if !value.is_finite() {
            return Err(SchwarzError::Integration { node: t1, value });
        }
        sum += w * value;
    }
    Ok(sum)
}

/// Poisson kernel `(1 - |x|²) / |x - ω|^n` of the unit ball in `R^n`.
pub fn poisson_kernel(x: &[f64], omega: &[f64]) -> Result<f64> {
    if x.len() != omega.len() {
        return Err(SchwarzError::domain(format!(
            "point has dimension {} but boundary point has dimension {}",
            x.len(),
            omega.len()
        )));
    }
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if norm_sq >= 1.0 {
        return Err(SchwarzError::domain(format!(
            "Poisson kernel needs |x| < 1, got |x| = {}",
            norm_sq.sqrt()
        )));
    }
    let dist_sq: f64 = x.iter().zip(omega).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((1.0 - norm_sq) / dist_sq.powf(0.5 * x.len() as f64))
}

/// Zonal form of the Poisson kernel at the axis point `ρN`:
/// `(1 - ρ²) / (1 + ρ² - 2ρt)^{n/2}`.
pub fn axial_poisson_kernel(rho: f64, t: f64, n: usize) -> f64 {
    (1.0 - rho * rho) / inverse_half_power(1.0 + rho * rho - 2.0 * rho * t, n)
}

/// `s^{n/2}` without a general `powf` for the common small dimensions.
pub(crate) fn inverse_half_power(s: f64, n: usize) -> f64 {
    let half = n / 2;
    let base = s.powi(half as i32);
    if n.is_multiple_of(2) {
        base
    } else {
        base * s.sqrt()
    }
}

/// Seeded uniform samples on `S^{n-1}`.
pub fn sample_sphere(n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < MIN_DIMENSION {
        return Err(SchwarzError::domain(format!("sphere dimension n must be at least 2, got {n}")));
    }
    if count == 0 {
        return Err(SchwarzError::domain("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        out.push(v.into_iter().map(|x| x / norm).collect());
    }
    Ok(out)
}

/// `∫_0^π sin^k θ dθ`.
pub fn sine_power_integral(k: usize) -> f64 {
    let mut even = PI;
    let mut odd = 2.0;
    let mut j = if k.is_multiple_of(2) { 0 } else { 1 };
    while j + 2 <= k {
        j += 2;
        let factor = (j as f64 - 1.0) / j as f64;
        if k.is_multiple_of(2) {
            even *= factor;
        } else {
            odd *= factor;
        }
    }
    if k.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if !(MIN_DIMENSION..=MAX_DIMENSION).contains(&n) {
        return Err(SchwarzError::domain(format!(
            "dimension n must lie in [{MIN_DIMENSION}, {MAX_DIMENSION}], got {n}"
        )));
    }
    Ok(())
}

fn gauss_chebyshev(order: usize) -> (Vec<f64>, Vec<f64>) {
    let nodes = (1..=order)
        .map(|k| ((2 * k - 1) as f64 * PI / (2 * order) as f64).cos())
        .collect();
    (nodes, vec![1.0 / order as f64; order])
}

/// Gauss rule for the weight `(1 - t²)^a`, weights normalized to sum to one.
///
/// Roots of the Jacobi polynomial `P_N^{(a,a)}` by Newton's method from
/// asymptotic initial guesses, with deflation against the roots already found.
fn gauss_gegenbauer(order: usize, a: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let big_n = order as f64;
    let mut nodes = Vec::with_capacity(order);
    let mut raw_weights = Vec::with_capacity(order);
    for k in 1..=order {
        let theta = (k as f64 - 0.25 + 0.5 * a) * PI / (big_n + a + 0.5);
        let mut x = theta.cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, p_prev) = jacobi_pair(order, a, x);
            let dp = derivative_at(order, a, x, p, p_prev);
            let deflation: f64 = nodes.iter().map(|r: &f64| 1.0 / (x - r)).sum();
            let step = p / (dp - p * deflation);
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1e-3) {
                converged = true;
                break;
            }
        }
        if !converged || !x.is_finite() || x.abs() >= 1.0 {
            return Err(SchwarzError::Solver {
                message: format!("Gauss-Jacobi root {k} of order {order} (a = {a})"),
                residual: x,
                iterations: 100,
            });
        }
        let (p, p_prev) = jacobi_pair(order, a, x);
        let dp = derivative_at(order, a, x, p, p_prev);
        nodes.push(x);
        raw_weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    // deflation keeps roots distinct but not necessarily in guess order
    let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(raw_weights).collect();
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0));
    let (nodes, raw_weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    if nodes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SchwarzError::Solver {
            message: format!("Gauss-Jacobi nodes of order {order} are not distinct"),
            residual: f64::NAN,
            iterations: 100,
        });
    }
    let total: f64 = raw_weights.iter().sum();
    let weights = raw_weights.into_iter().map(|w| w / total).collect();
    Ok((nodes, weights))
}

/// `(P_N^{(a,a)}(x), P_{N-1}^{(a,a)}(x))` by the three-term recurrence.
fn jacobi_pair(order: usize, a: f64, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = (a + 1.0) * x;
    if order == 0 {
        return (prev, 0.0);
    }
    for k in 2..=order {
        let k = k as f64;
        let s = 2.0 * k + 2.0 * a;
        let next = ((s - 1.0) * s * (s - 2.0) * x * cur
            - 2.0 * (k + a - 1.0) * (k + a - 1.0) * s * prev)
            / (2.0 * k * (k + 2.0 * a) * (s - 2.0));
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn derivative_at(order: usize, a: f64, x: f64, p: f64, p_prev: f64) -> f64 {
    let big_n = order as f64;
    let s = 2.0 * big_n + 2.0 * a;
    (-big_n * s * x * p + 2.0 * (big_n + a) * (big_n + a) * p_prev) / (s * (1.0 - x * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // ∫ t^{2k} dσ on S^{n-1} = Π_{j<k} (2j+1)/(n+2j)
    fn even_moment(n: usize, k: usize) -> f64 {
        (0..k).map(|j| (2 * j + 1) as f64 / (n + 2 * j) as f64).product()
    }

    #[test]
    fn weights_normalized_and_low_moments() {
        for n in 2..=16 {
            for order in [1usize, 2, 7, 64, 512] {
                let rule = QuadratureRule::new(n, order).unwrap();
                let sum: f64 = rule.weights().iter().sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
                assert!(rule.weights().iter().all(|&w| w > 0.0));
                let first = zonal_integrate(&rule, |t| t, &[]).unwrap();
                assert_abs_diff_eq!(first, 0.0, epsilon = 1e-12);
                if order >= 2 {
                    let second = zonal_integrate(&rule, |t| t * t, &[]).unwrap();
                    assert_abs_diff_eq!(second, 1.0 / n as f64, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn polynomial_exactness_up_to_degree_2n_minus_1() {
        for n in [2usize, 3, 4, 7, 16] {
            for order in [3usize, 8, 20] {
                let rule = QuadratureRule::new(n, order).unwrap();
                for degree in 0..2 * order {
                    let got = zonal_integrate(&rule, |t| t.powi(degree as i32), &[]).unwrap();
                    let want = if degree % 2 == 1 { 0.0 } else { even_moment(n, degree / 2) };
                    assert_abs_diff_eq!(got, want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn large_orders_stay_ordered() {
        for n in [3usize, 9, 16] {
            let rule = QuadratureRule::new(n, 2048).unwrap();
            assert!(rule.nodes().windows(2).all(|w| w[1] < w[0]));
            assert_abs_diff_eq!(zonal_integrate(&rule, |t| t * t, &[]).unwrap(), 1.0 / n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn piecewise_rule_matches_moments() {
        for n in 2..=16 {
            let rule = QuadratureRule::new(n, 64).unwrap();
            let pieces = rule.nodes_with_breakpoints(&[-0.3, 0.5]);
            let mass: f64 = pieces.iter().map(|p| p.1).sum();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-13);
            let second: f64 = pieces.iter().map(|(t, w)| w * t * t).sum();
            assert_abs_diff_eq!(second, 1.0 / n as f64, epsilon = 1e-13);
        }
    }

    #[test]
    fn hemisphere_indicator_is_one_half() {
        for n in 2..=16 {
            let rule = QuadratureRule::new(n, 32).unwrap();
            let v = zonal_integrate(&rule, |t| if t > 0.0 { 1.0 } else { 0.0 }, &[0.0]).unwrap();
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-14);
            let sign = zonal_integrate(&rule, |t| t.signum(), &[0.0]).unwrap();
            assert_abs_diff_eq!(sign, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn non_finite_profile_reports_node() {
        let rule = QuadratureRule::new(3, 8).unwrap();
        let err = zonal_integrate(&rule, |t| if t > 0.5 { f64::NAN } else { 1.0 }, &[]).unwrap_err();
        match err {
            SchwarzError::Integration { node, .. } => assert!(node > 0.5),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(QuadratureRule::new(1, 8).is_err());
        assert!(QuadratureRule::new(17, 8).is_err());
        assert!(QuadratureRule::new(3, 0).is_err());
    }

    #[test]
    fn poisson_kernel_examples() {
        assert_abs_diff_eq!(poisson_kernel(&[0.0, 0.0, 0.0], &[0.0, 0.6, 0.8]).unwrap(), 1.0);
        assert_abs_diff_eq!(poisson_kernel(&[0.5, 0.0], &[1.0, 0.0]).unwrap(), 3.0, epsilon = 1e-14);
        assert!(poisson_kernel(&[0.6, 0.8], &[1.0, 0.0]).is_err());
        assert!(poisson_kernel(&[0.0, 0.0], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn biaxial_basic_integrals() {
        for n in 2..=8 {
            let rule = BiaxialRule::new(n, 24, 24).unwrap();
            assert_abs_diff_eq!(biaxial_integrate(&rule, |_, _| 1.0, &[]).unwrap(), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(biaxial_integrate(&rule, |t1, _| t1, &[]).unwrap(), 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(biaxial_integrate(&rule, |t1, t2| t1 * t2, &[]).unwrap(), 0.0, epsilon = 1e-10);
            let zonal = zonal_integrate(rule.outer(), |t| t * t, &[]).unwrap();
            let biax = biaxial_integrate(&rule, |t1, _| t1 * t1, &[]).unwrap();
            assert_abs_diff_eq!(biax, zonal, epsilon = 1e-10);
            assert_abs_diff_eq!(biax, 1.0 / n as f64, epsilon = 1e-10);
            // second coordinate has the same marginal as the first
            let t2sq = biaxial_integrate(&rule, |_, t2| t2 * t2, &[]).unwrap();
            assert_abs_diff_eq!(t2sq, 1.0 / n as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn sphere_samples_are_unit_and_reproducible() {
        let one = sample_sphere(3, 1, 7).unwrap();
        assert_eq!(one.len(), 1);
        assert_abs_diff_eq!(one[0].iter().map(|x| x * x).sum::<f64>().sqrt(), 1.0, epsilon = 1e-14);
        assert_eq!(sample_sphere(5, 10, 3).unwrap(), sample_sphere(5, 10, 3).unwrap());
        assert!(sample_sphere(1, 10, 3).is_err());
        assert!(sample_sphere(3, 0, 3).is_err());
    }

    #[test]
    fn sine_power_integrals() {
        assert_abs_diff_eq!(sine_power_integral(0), PI);
        assert_abs_diff_eq!(sine_power_integral(1), 2.0);
        assert_abs_diff_eq!(sine_power_integral(2), PI / 2.0);
        assert_abs_diff_eq!(sine_power_integral(3), 4.0 / 3.0);
    }
}
