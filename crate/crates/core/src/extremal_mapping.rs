//! Extremal boundary maps `(u, v): S → closed unit ball of R^{m+1}` and their
//! Poisson extensions `F = (U, V)`.
//!
//! On the `b > 0` branch `u = A/√(1+|A|²)` and `v = √(1-|u|²) = 1/√(1+|A|²)`;
//! on the `b = 0` branch `u = 𝒜/|𝒜|` and `v ≡ 0`. For `b < 0` the map is built
//! from `|b|` and `V` is negated. Profiles are closed-form functions of the
//! latitude `t = ⟨ω,N⟩`; quadrature samples them directly.
//!
//! Where `𝒜` vanishes (a single latitude on the zero-tail branch) `u` is set
//! to zero. That is a measure-zero choice of representative.

use std::sync::Arc;

use crate::error::{Result, SchwarzError};
use crate::extremal_solver::{
    self, jump_location, kernel_profile, Branch, LagrangeSolution, ProblemSpec,
};
use crate::sphere_quadrature::{inverse_half_power, kernel_breakpoints, BiaxialRule, QuadratureRule};

/// Boundary data depending only on the latitude, valued in `R^{m+1}`.
pub trait ZonalBoundaryData {
    /// Ambient dimension `n` of the domain ball.
    fn dimension(&self) -> usize;
    /// Number of output components (`m + 1`).
    fn components(&self) -> usize;
    /// Writes the boundary value at latitude `t` into `out`.
    fn value_into(&self, t: f64, out: &mut [f64]);
    /// Latitudes where the data jumps or changes steeply.
    fn breakpoints(&self) -> Vec<f64>;

    fn value(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.components()];
        self.value_into(t, &mut out);
        out
    }
}

/// The extremal boundary map for a problem spec.
#[derive(Clone, Debug)]
pub struct BoundaryMap {
    spec: ProblemSpec,
    solution: LagrangeSolution,
    rule: Arc<QuadratureRule>,
    b_sign: f64,
    breakpoints: Vec<f64>,
}

/// Value of a Poisson extension at an interior point.
#[derive(Clone, Debug, PartialEq)]
pub struct MapEvaluation {
    pub x: Vec<f64>,
    /// `(U_1, …, U_m, V)`.
    pub value: Vec<f64>,
    /// `|Σ w P - 1|`: how far the discretized kernel is from integrating to one.
    pub quadrature_error_estimate: f64,
}

impl MapEvaluation {
    pub fn norm(&self) -> f64 {
        self.value.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl BoundaryMap {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn solution(&self) -> &LagrangeSolution {
        &self.solution
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `+1` when `b ≥ 0`, `-1` otherwise.
    pub fn b_sign(&self) -> f64 {
        self.b_sign
    }

    /// `u(t)`, the first `m` components.
    pub fn u(&self, t: f64) -> Vec<f64> {
        let mut out = self.value(t);
        out.pop();
        out
    }

    /// `v(t)`, the last component, with the sign of `b` applied.
    pub fn v(&self, t: f64) -> f64 {
        let mut out = vec![0.0; self.components()];
        self.value_into(t, &mut out);
        out[self.spec.m]
    }

    /// Same map with `λ_1` replaced; the result no longer solves the moment
    /// system and exists for sensitivity checks.
    pub fn with_perturbed_lambda1(&self, delta: f64) -> Self {
        let mut perturbed = self.clone();
        perturbed.solution.lambda[0] += delta;
        perturbed.breakpoints = breakpoints_for(&perturbed.spec, perturbed.solution.lambda[0]);
        perturbed
    }
}

impl ZonalBoundaryData for BoundaryMap {
    fn dimension(&self) -> usize {
        self.spec.n
    }

    fn components(&self) -> usize {
        self.spec.m + 1
    }

    fn value_into(&self, t: f64, out: &mut [f64]) {
        let m = self.spec.m;
        let lambda = &self.solution.lambda;
        let g = kernel_profile(self.spec.r, self.spec.n, t);
        match self.solution.branch {
            Branch::PositiveB => {
                let mu = self.solution.mu.unwrap_or(1.0);
                out[0] = (g - lambda[0]) / mu;
                for j in 1..m {
                    out[j] = -lambda[j] / mu;
                }
                let inv = 1.0 / (1.0 + out[..m].iter().map(|x| x * x).sum::<f64>()).sqrt();
                for o in out[..m].iter_mut() {
                    *o *= inv;
                }
                out[m] = self.b_sign * inv;
            }
            Branch::ZeroB => {
                out[0] = g - lambda[0];
                for j in 1..m {
                    out[j] = -lambda[j];
                }
                let norm = out[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
                for o in out[..m].iter_mut() {
                    *o = if norm > 0.0 { *o / norm } else { 0.0 };
                }
                out[m] = 0.0;
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

fn breakpoints_for(spec: &ProblemSpec, lambda1: f64) -> Vec<f64> {
    jump_location(spec.r, spec.n, lambda1).into_iter().collect()
}

/// Builds the extremal boundary map `(u_{a,b,r}, v_{a,b,r})`.
pub fn boundary_map(spec: &ProblemSpec, rule: &QuadratureRule) -> Result<BoundaryMap> {
    boundary_map_shared(spec, Arc::new(rule.clone()))
}

/// As [`boundary_map`], sharing an existing rule.
pub fn boundary_map_shared(spec: &ProblemSpec, rule: Arc<QuadratureRule>) -> Result<BoundaryMap> {
    boundary_map_with_tol(spec, rule, None)
}

/// As [`boundary_map_shared`] with an explicit moment-residual tolerance
/// (`None` keeps the branch default).
pub fn boundary_map_with_tol(spec: &ProblemSpec, rule: Arc<QuadratureRule>, tol: Option<f64>) -> Result<BoundaryMap> {
    let b_sign = if spec.b < 0.0 { -1.0 } else { 1.0 };
    let solved_spec = if spec.b < 0.0 { spec.with_center(spec.a.clone(), -spec.b)? } else { spec.clone() };
    let solution = match tol {
        None => extremal_solver::solve(&solved_spec, &rule)?,
        Some(tol) if solved_spec.b > 0.0 => extremal_solver::solve_positive_b(&solved_spec, &rule, tol)?,
        Some(tol) => extremal_solver::solve_zero_b(&solved_spec, &rule, tol)?,
    };
    let breakpoints = breakpoints_for(spec, solution.lambda[0]);
    Ok(BoundaryMap {
        spec: spec.clone(),
        solution,
        rule,
        b_sign,
        breakpoints,
    })
}

/// Poisson extension of zonal data at `ρN`.
pub fn poisson_on_axis<D: ZonalBoundaryData + ?Sized>(
    data: &D,
    rho: f64,
    rule: &QuadratureRule,
) -> Result<MapEvaluation> {
    if !(0.0..1.0).contains(&rho) {
        return Err(SchwarzError::domain(format!("axis evaluation needs 0 <= ρ < 1, got {rho}")));
    }
    let n = data.dimension();
    if rule.dimension() != n {
        return Err(SchwarzError::domain("quadrature rule dimension does not match the data"));
    }
    let k = data.components();
    let mut value = vec![0.0; k];
    let mut sample = vec![0.0; k];
    let mut kernel_mass = 0.0;
    let scale = 1.0 - rho * rho;
    let mut breakpoints = data.breakpoints();
    breakpoints.extend(kernel_breakpoints(rho));
    for (t, w) in rule.nodes_with_breakpoints(&breakpoints) {
        let p = scale / inverse_half_power(1.0 + rho * rho - 2.0 * rho * t, n);
        data.value_into(t, &mut sample);
        let wp = w * p;
        kernel_mass += wp;
        for (acc, s) in value.iter_mut().zip(&sample) {
            *acc += wp * s;
        }
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rho;
    Ok(MapEvaluation {
        x,
        value,
        quadrature_error_estimate: (kernel_mass - 1.0).abs(),
    })
}

/// Poisson extension of zonal data at an arbitrary interior point.
///
/// Writes `x = ρ(cos θ N + sin θ ê)` and integrates the biaxial kernel
/// `(1 - ρ²) / (1 + ρ² - 2ρ(t1 cos θ + t2 sin θ))^{n/2}`.
pub fn poisson_general<D: ZonalBoundaryData + ?Sized>(
    data: &D,
    x: &[f64],
    rule: &BiaxialRule,
) -> Result<MapEvaluation> {
    let n = data.dimension();
    if x.len() != n || rule.dimension() != n {
        return Err(SchwarzError::domain(format!("evaluation point must lie in R^{n}")));
    }
    let rho_sq: f64 = x.iter().map(|v| v * v).sum();
    if rho_sq >= 1.0 {
        return Err(SchwarzError::domain(format!("evaluation needs |x| < 1, got {}", rho_sq.sqrt())));
    }
    let rho = rho_sq.sqrt();
    let (cos, sin) = if rho > 0.0 {
        let c = (x[n - 1] / rho).clamp(-1.0, 1.0);
        (c, (1.0 - c * c).max(0.0).sqrt())
    } else {
        (1.0, 0.0)
    };
    let k = data.components();
    let mut value = vec![0.0; k];
    let mut sample = vec![0.0; k];
    let mut kernel_mass = 0.0;
    let scale = 1.0 - rho_sq;
    let inner = rule.inner();
    for (t1, w1) in rule.outer().nodes_with_breakpoints(&data.breakpoints()) {
        data.value_into(t1, &mut sample);
        let radius = (1.0 - t1 * t1).max(0.0).sqrt();
        let base = 1.0 + rho_sq - 2.0 * rho * t1 * cos;
        let mut kernel_sum = 0.0;
        for &(xi, w2) in inner {
            let d = base - 2.0 * rho * sin * radius * xi;
            kernel_sum += w2 / inverse_half_power(d, n);
        }
        let wp = w1 * scale * kernel_sum;
        kernel_mass += wp;
        for (acc, s) in value.iter_mut().zip(&sample) {
            *acc += wp * s;
        }
    }
    Ok(MapEvaluation {
        x: x.to_vec(),
        value,
        quadrature_error_estimate: (kernel_mass - 1.0).abs(),
    })
}

/// `F_{a,b,r}(ρN)`.
pub fn eval_on_axis(map: &BoundaryMap, rho: f64) -> Result<MapEvaluation> {
    poisson_on_axis(map, rho, &map.rule)
}

/// `F_{a,b,r}(x)` for any `|x| < 1`.
pub fn eval_general(map: &BoundaryMap, x: &[f64], rule: &BiaxialRule) -> Result<MapEvaluation> {
    poisson_general(map, x, rule)
}

/// `(‖∫u dσ - a‖, |∫v dσ - b|)`.
pub fn constraint_residuals(map: &BoundaryMap, rule: &QuadratureRule) -> Result<(f64, f64)> {
    let m = map.spec.m;
    let mut mean = vec![0.0; m + 1];
    let mut sample = vec![0.0; m + 1];
    for (t, w) in rule.nodes_with_breakpoints(&map.breakpoints) {
        map.value_into(t, &mut sample);
        for (acc, s) in mean.iter_mut().zip(&sample) {
            *acc += w * s;
        }
    }
    let ra = mean[..m]
        .iter()
        .zip(&map.spec.a)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let rb = (mean[m] - map.spec.b).abs();
    Ok((ra, rb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn map(n: usize, m: usize, r: f64, a: Vec<f64>, b: f64) -> BoundaryMap {
        let spec = ProblemSpec::new(n, m, r, a, b).unwrap();
        boundary_map(&spec, &QuadratureRule::new(n, 256).unwrap()).unwrap()
    }

    #[test]
    fn origin_map_is_hemisphere_sign() {
        let bm = map(3, 2, 0.5, vec![0.0, 0.0], 0.0);
        for t in [-0.9, -0.1, 0.2, 0.7] {
            let u = bm.u(t);
            assert_abs_diff_eq!(u[0], t.signum(), epsilon = 1e-12);
            assert_eq!(u[1], 0.0);
            assert_eq!(bm.v(t), 0.0);
        }
        let (ra, rb) = constraint_residuals(&bm, bm.rule()).unwrap();
        assert!(ra < 1e-12 && rb == 0.0);
    }

    #[test]
    fn high_b_map_puts_mass_in_v() {
        let bm = map(3, 1, 0.5, vec![0.0], 0.9);
        let (ra, rb) = constraint_residuals(&bm, bm.rule()).unwrap();
        assert!(ra < 1e-8 && rb < 1e-8);
        // the vertical component carries almost all of the mass; u is only
        // large in a small cap around the pole where the kernel peaks
        let v_mass = crate::sphere_quadrature::zonal_integrate(bm.rule(), |t| (1.0 - bm.u(t)[0].powi(2)).sqrt(), &bm.breakpoints()).unwrap();
        assert_abs_diff_eq!(v_mass, 0.9, epsilon = 1e-8);
        let mean_abs = crate::sphere_quadrature::zonal_integrate(bm.rule(), |t| bm.u(t)[0].abs(), &bm.breakpoints()).unwrap();
        assert!(mean_abs < 0.4, "mean |u| = {mean_abs}");
    }

    #[test]
    fn negative_b_flips_v_only() {
        let up = map(3, 2, 0.4, vec![0.1, -0.2], 0.4);
        let down = map(3, 2, 0.4, vec![0.1, -0.2], -0.4);
        for t in [-0.8, 0.0, 0.5, 0.99] {
            assert_eq!(up.u(t), down.u(t));
            assert_eq!(up.v(t), -down.v(t));
        }
        let (_, rb) = constraint_residuals(&down, down.rule()).unwrap();
        assert!(rb < 1e-8);
    }

    #[test]
    fn ball_constraint_holds_pointwise() {
        for bm in [map(4, 3, 0.7, vec![0.2, 0.1, -0.3], 0.5), map(2, 2, 0.3, vec![0.5, 0.2], 0.0)] {
            for k in 0..=1000 {
                let t = -1.0 + 0.002 * k as f64;
                let value = bm.value(t);
                assert!(value.iter().map(|x| x * x).sum::<f64>() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn center_value_and_heinz_profile() {
        let bm = map(2, 1, 0.5, vec![0.0], 0.0);
        let at_center = eval_on_axis(&bm, 0.0).unwrap();
        assert_abs_diff_eq!(at_center.value[0], 0.0, epsilon = 1e-14);
        for rho in [0.1, 0.5, 0.9] {
            let eval = eval_on_axis(&bm, rho).unwrap();
            assert_abs_diff_eq!(eval.value[0], 4.0 / PI * f64::atan(rho), epsilon = 1e-12);
        }
        assert!(eval_on_axis(&bm, 1.0).is_err());
    }

    #[test]
    fn three_dimensional_hemisphere_extension() {
        // U(rN) = (1-r²)/2 (∫_0^1 - ∫_{-1}^0) (1+r²-2rt)^{-3/2} dt on S², dσ = dt/2
        let bm = map(3, 1, 0.5, vec![0.0], 0.0);
        for r in [0.2f64, 0.5, 0.8] {
            let s = (1.0 + r * r).sqrt();
            // antiderivative of (1+r²-2rt)^{-3/2} in t is (1/r)(1+r²-2rt)^{-1/2}
            let upper = (1.0 / r) * (1.0 / (1.0 - r) - 1.0 / s);
            let lower = (1.0 / r) * (1.0 / s - 1.0 / (1.0 + r));
            let expected = 0.5 * (1.0 - r * r) * (upper - lower);
            assert_abs_diff_eq!(eval_on_axis(&bm, r).unwrap().value[0], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn general_evaluation_matches_axis() {
        let bm = map(3, 2, 0.6, vec![0.2, 0.1], 0.3);
        let biax = BiaxialRule::new(3, 256, 64).unwrap();
        let rho = 0.55;
        let axis = eval_on_axis(&bm, rho).unwrap();
        let general = eval_general(&bm, &[0.0, 0.0, rho], &biax).unwrap();
        for (x, y) in axis.value.iter().zip(&general.value) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
        let center = eval_general(&bm, &[0.0, 0.0, 0.0], &biax).unwrap();
        assert_abs_diff_eq!(center.value[0], 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(center.value[2], 0.3, epsilon = 1e-9);
        // rotations fixing N leave the value unchanged
        let a = eval_general(&bm, &[0.3, 0.0, 0.4], &biax).unwrap();
        let b = eval_general(&bm, &[0.0, -0.3, 0.4], &biax).unwrap();
        for (x, y) in a.value.iter().zip(&b.value) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert!(a.norm() < 1.0);
    }

    #[test]
    fn perturbation_breaks_constraint() {
        let bm = map(3, 1, 0.5, vec![0.3], 0.4);
        let (ra, _) = constraint_residuals(&bm.with_perturbed_lambda1(1e-3), bm.rule()).unwrap();
        assert!(ra > 1e-5, "ra = {ra}");
    }
}
