//! Multiplier fields, their moments, and the solvers for the moment system.
//!
//! For `λ ∈ R^m`, `μ > 0` and `g(t) = |rN - ω|^{-n} = (1 + r² - 2rt)^{-n/2}`,
//!
//! ```text
//! A(ω) = (g(t) l - λ) / μ,        l = (1, 0, …, 0) ∈ R^m,
//! R(λ, μ) = ∫ A / √(1 + |A|²) dσ,   I(λ, μ) = ∫ 1 / √(1 + |A|²) dσ,
//! 𝒜(ω) = g(t) l - λ,              ℛ(λ) = ∫ 𝒜 / |𝒜| dσ.
//! ```
//!
//! Only the first component of `A` depends on `ω`. The others are the
//! constants `-λ_j/μ`, so `R_j = (-λ_j/μ) I` for `j ≥ 2`, and matching
//! `R = a`, `I = b` forces `λ_j = -μ a_j / b`. With `κ = √(1 + |a_tail|²/b²)`
//! and `β = μκ` the system collapses to the two-unknown *canonical problem*
//!
//! ```text
//! ∫ (g - α) / √((g - α)² + β²) dσ = a_1,    ∫ β / √((g - α)² + β²) dσ = c,
//! ```
//!
//! with `α = λ_1` and `c = √(b² + |a_tail|²)`. The `b = 0` system with a
//! nonzero tail is the same canonical problem with `β = |λ_tail|` and
//! `c = |a_tail|`; with a zero tail it degenerates to `∫ sign(g - α) dσ = a_1`.

use log::debug;

use crate::error::{Result, SchwarzError};
use crate::linalg_kernels::Matrix;
use crate::sphere_quadrature::{inverse_half_power, QuadratureRule, MAX_DIMENSION, MIN_DIMENSION};

/// Largest supported target parameter `m`.
pub const MAX_TARGET_DIMENSION: usize = 8;

/// Default residual tolerance of the `b > 0` solver.
pub const POSITIVE_B_TOL: f64 = 1e-10;
/// Default residual tolerance of the `b = 0` solver.
pub const ZERO_B_TOL: f64 = 1e-8;

const CONDITIONING_MARGIN: f64 = 1e-8;

/// Dimensions, radius and center value `F(0) = (a, b)` of an extremal problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub a: Vec<f64>,
    pub b: f64,
}

impl ProblemSpec {
    pub fn new(n: usize, m: usize, r: f64, a: Vec<f64>, b: f64) -> Result<Self> {
        if !(MIN_DIMENSION..=MAX_DIMENSION).contains(&n) {
            return Err(SchwarzError::domain(format!(
                "n must lie in [{MIN_DIMENSION}, {MAX_DIMENSION}], got {n}"
            )));
        }
        if !(1..=MAX_TARGET_DIMENSION).contains(&m) {
            return Err(SchwarzError::domain(format!("m must lie in [1, {MAX_TARGET_DIMENSION}], got {m}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(SchwarzError::domain("r must lie in (0,1)"));
        }
        if a.len() != m {
            return Err(SchwarzError::domain(format!("a must have {m} components, got {}", a.len())));
        }
        if !b.is_finite() || a.iter().any(|x| !x.is_finite()) {
            return Err(SchwarzError::domain("a and b must be finite"));
        }
        let norm_sq = a.iter().map(|x| x * x).sum::<f64>() + b * b;
        if norm_sq >= 1.0 {
            return Err(SchwarzError::domain(format!("(a, b) must satisfy |a|^2 + b^2 < 1, got {norm_sq}")));
        }
        Ok(Self { n, m, r, a, b })
    }

    /// The same problem with a different center value.
    pub fn with_center(&self, a: Vec<f64>, b: f64) -> Result<Self> {
        Self::new(self.n, self.m, self.r, a, b)
    }

    /// The same problem at a different radius.
    pub fn with_radius(&self, r: f64) -> Result<Self> {
        Self::new(self.n, self.m, r, self.a.clone(), self.b)
    }

    pub fn center(&self) -> Vec<f64> {
        let mut c = self.a.clone();
        c.push(self.b);
        c
    }

    fn tail_norm(&self) -> f64 {
        self.a[1..].iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    PositiveB,
    ZeroB,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::PositiveB => "positive_b",
            Branch::ZeroB => "zero_b",
        }
    }
}

/// Multipliers solving the moment system, with diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeSolution {
    pub branch: Branch,
    pub lambda: Vec<f64>,
    /// Present on the `b > 0` branch only.
    pub mu: Option<f64>,
    /// Max-norm residual of the full moment system at `(lambda, mu)`.
    pub residual: f64,
    pub iterations: usize,
    /// Latitude where the sign field jumps (zero branch with zero tail).
    pub jump_point: Option<f64>,
    pub warnings: Vec<String>,
}

/// Knobs of the `b > 0` solver.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting `(λ_1, μ)`; defaults to `(g(0), 1)`.
    pub initial: Option<(f64, f64)>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: POSITIVE_B_TOL, max_iter: 200, initial: None }
    }
}

/// `g(t) = (1 + r² - 2rt)^{-n/2}`, the reciprocal of `|rN - ω|^n`.
pub fn kernel_profile(r: f64, n: usize, t: f64) -> f64 {
    1.0 / inverse_half_power(1.0 + r * r - 2.0 * r * t, n)
}

/// Inverse of [`kernel_profile`] in `t`: `(1 + r² - y^{-2/n}) / (2r)`.
pub fn kernel_profile_inverse(r: f64, n: usize, y: f64) -> f64 {
    (1.0 + r * r - y.powf(-2.0 / n as f64)) / (2.0 * r)
}

/// Latitude in `(-1, 1)` where `g(t) = level`, if any.
pub fn jump_location(r: f64, n: usize, level: f64) -> Option<f64> {
    if level <= kernel_profile(r, n, -1.0) || level >= kernel_profile(r, n, 1.0) {
        return None;
    }
    let t = kernel_profile_inverse(r, n, level);
    (t > -1.0 && t < 1.0).then_some(t)
}

/// `A(t) = (g(t) l - λ) / μ`.
pub fn field_a(spec: &ProblemSpec, lambda: &[f64], mu: f64, t: f64) -> Result<Vec<f64>> {
    check_lambda(spec, lambda)?;
    check_mu(mu)?;
    let g = kernel_profile(spec.r, spec.n, t);
    Ok(lambda
        .iter()
        .enumerate()
        .map(|(j, l)| if j == 0 { (g - l) / mu } else { -l / mu })
        .collect())
}

/// `(R(λ, μ), I(λ, μ))`.
pub fn moments_ri(spec: &ProblemSpec, lambda: &[f64], mu: f64, rule: &QuadratureRule) -> Result<(Vec<f64>, f64)> {
    check_lambda(spec, lambda)?;
    check_mu(mu)?;
    check_rule(spec, rule)?;
    let tail_sq: f64 = lambda[1..].iter().map(|l| (l / mu) * (l / mu)).sum();
    let mut first = 0.0;
    let mut mass = 0.0;
    for (t, w) in rule.nodes_with_breakpoints(&breakpoints_for(spec, lambda[0])) {
        let a1 = (kernel_profile(spec.r, spec.n, t) - lambda[0]) / mu;
        let inv = 1.0 / (1.0 + tail_sq + a1 * a1).sqrt();
        if !inv.is_finite() {
            return Err(SchwarzError::Integration { node: t, value: inv });
        }
        first += w * a1 * inv;
        mass += w * inv;
    }
    let mut r = Vec::with_capacity(spec.m);
    r.push(first);
    r.extend(lambda[1..].iter().map(|l| -l / mu * mass));
    Ok((r, mass))
}

/// Jacobian of `(R_1, …, R_m, I)` with respect to `(λ_1, …, λ_m, μ)`.
///
/// Rows are `R_1, …, R_m, I`; columns are `λ_1, …, λ_m, μ`. With
/// `S = 1 + |A|²`:
///
/// ```text
/// ∂R_j/∂λ_i = -(1/μ) ∫ (δ_ij S - A_i A_j) S^{-3/2} dσ
/// ∂R_j/∂μ   = -(1/μ) ∫ A_j S^{-3/2} dσ = -∂I/∂λ_j
/// ∂I/∂μ     =  (1/μ) ∫ |A|² S^{-3/2} dσ
/// ```
pub fn jacobian_ri(spec: &ProblemSpec, lambda: &[f64], mu: f64, rule: &QuadratureRule) -> Result<Matrix> {
    check_lambda(spec, lambda)?;
    check_mu(mu)?;
    check_rule(spec, rule)?;
    let m = spec.m;
    let mut a = vec![0.0; m];
    for j in 1..m {
        a[j] = -lambda[j] / mu;
    }
    let tail_sq: f64 = a[1..].iter().map(|x| x * x).sum();

    // ∫ A_i A_j S^{-3/2}, ∫ S^{-1/2}, ∫ A_j S^{-3/2}, ∫ |A|² S^{-3/2}
    let mut outer = Matrix::zeros(m, m);
    let mut s_half = 0.0;
    let mut first = vec![0.0; m];
    let mut norm_sq = 0.0;
    for (t, w) in rule.nodes_with_breakpoints(&breakpoints_for(spec, lambda[0])) {
        a[0] = (kernel_profile(spec.r, spec.n, t) - lambda[0]) / mu;
        let s = 1.0 + tail_sq + a[0] * a[0];
        let p3 = 1.0 / (s * s.sqrt());
        if !p3.is_finite() {
            return Err(SchwarzError::Integration { node: t, value: p3 });
        }
        let wp = w * p3;
        for i in 0..m {
            first[i] += wp * a[i];
            for j in i..m {
                outer[(i, j)] += wp * a[i] * a[j];
            }
        }
        s_half += wp * s;
        norm_sq += wp * (s - 1.0);
    }

    let mut jac = Matrix::zeros(m + 1, m + 1);
    for j in 0..m {
        for i in 0..m {
            let aa = if i <= j { outer[(i, j)] } else { outer[(j, i)] };
            let delta = if i == j { s_half } else { 0.0 };
            jac[(j, i)] = -(delta - aa) / mu;
        }
        jac[(j, m)] = -first[j] / mu;
        jac[(m, j)] = first[j] / mu;
    }
    jac[(m, m)] = norm_sq / mu;
    Ok(jac)
}

/// `ℛ(λ) = ∫ 𝒜/|𝒜| dσ`.
pub fn moments_rcal(spec: &ProblemSpec, lambda: &[f64], rule: &QuadratureRule) -> Result<Vec<f64>> {
    check_lambda(spec, lambda)?;
    check_rule(spec, rule)?;
    let tail_sq: f64 = lambda[1..].iter().map(|l| l * l).sum();
    let mut first = 0.0;
    let mut inv_mass = 0.0;
    for (t, w) in rule.nodes_with_breakpoints(&breakpoints_for(spec, lambda[0])) {
        let a1 = kernel_profile(spec.r, spec.n, t) - lambda[0];
        let norm = (a1 * a1 + tail_sq).sqrt();
        if norm == 0.0 {
            // measure-zero set where the field vanishes
            continue;
        }
        first += w * a1 / norm;
        inv_mass += w / norm;
    }
    let mut out = Vec::with_capacity(spec.m);
    out.push(first);
    out.extend(lambda[1..].iter().map(|l| -l * inv_mass));
    Ok(out)
}

/// Solves `R(λ, μ) = a`, `I(λ, μ) = b` for `b > 0`.
pub fn solve_positive_b(spec: &ProblemSpec, rule: &QuadratureRule, tol: f64) -> Result<LagrangeSolution> {
    solve_positive_b_with(spec, rule, &SolverOptions { tol, ..SolverOptions::default() })
}

pub fn solve_positive_b_with(
    spec: &ProblemSpec,
    rule: &QuadratureRule,
    options: &SolverOptions,
) -> Result<LagrangeSolution> {
    if !(spec.b > 0.0) {
        return Err(SchwarzError::Branch(format!("positive-b solver needs b > 0, got b = {}", spec.b)));
    }
    check_rule(spec, rule)?;
    let m = spec.m;
    let tail_norm = spec.tail_norm();
    let kappa = (1.0 + (tail_norm / spec.b).powi(2)).sqrt();
    let canonical = Canonical {
        r: spec.r,
        n: spec.n,
        a1: spec.a[0],
        c: spec.b.hypot(tail_norm),
    };
    let (alpha0, mu0) = options
        .initial
        .unwrap_or((kernel_profile(spec.r, spec.n, 0.0), 1.0));
    if !(mu0 > 0.0) {
        return Err(SchwarzError::domain("initial μ must be positive"));
    }
    let (alpha, beta, iterations) = canonical.solve(rule, alpha0, mu0 * kappa, options)?;

    let mu = beta / kappa;
    let mut lambda = vec![alpha; 1];
    lambda.extend(spec.a[1..].iter().map(|aj| -mu * aj / spec.b));
    let (r, i) = moments_ri(spec, &lambda, mu, rule)?;
    let residual = r
        .iter()
        .zip(&spec.a)
        .map(|(x, y)| (x - y).abs())
        .fold((i - spec.b).abs(), f64::max);

    let mut warnings = Vec::new();
    let a_norm = spec.a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (1.0 - a_norm * a_norm).max(0.0).sqrt() - spec.b < CONDITIONING_MARGIN {
        warnings.push("ill-conditioned: (a, b) is within 1e-8 of the unit sphere".to_string());
    }
    if spec.b < CONDITIONING_MARGIN {
        warnings.push("ill-conditioned: 0 < b < 1e-8 is close to the zero-b branch".to_string());
    }
    debug!("positive-b solve: lambda = {lambda:?}, mu = {mu}, residual = {residual:e}, iterations = {iterations}");
    if residual >= options.tol {
        return Err(SchwarzError::Solver {
            message: format!("moment residual above tolerance for m = {m}"),
            residual,
            iterations,
        });
    }
    Ok(LagrangeSolution {
        branch: Branch::PositiveB,
        lambda,
        mu: Some(mu),
        residual,
        iterations,
        jump_point: None,
        warnings,
    })
}

/// Solves `ℛ(λ) = a` (the `b = 0` branch).
pub fn solve_zero_b(spec: &ProblemSpec, rule: &QuadratureRule, tol: f64) -> Result<LagrangeSolution> {
    if spec.b != 0.0 {
        return Err(SchwarzError::Branch(format!("zero-b solver needs b = 0, got b = {}", spec.b)));
    }
    check_rule(spec, rule)?;
    let a_norm = spec.a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if a_norm >= 1.0 {
        return Err(SchwarzError::domain("zero-b solver needs |a| < 1"));
    }
    let mut warnings = Vec::new();
    if 1.0 - a_norm < CONDITIONING_MARGIN {
        warnings.push("ill-conditioned: |a| is within 1e-8 of 1".to_string());
    }
    let tail_norm = spec.tail_norm();
    let (lambda, iterations, jump_point) = if tail_norm > 0.0 {
        let canonical = Canonical { r: spec.r, n: spec.n, a1: spec.a[0], c: tail_norm };
        let options = SolverOptions { tol, ..SolverOptions::default() };
        let (alpha, s, iterations) =
            canonical.solve(rule, kernel_profile(spec.r, spec.n, 0.0), 1.0, &options)?;
        let mut lambda = vec![alpha];
        lambda.extend(spec.a[1..].iter().map(|aj| -aj * s / tail_norm));
        (lambda, iterations, None)
    } else {
        if spec.m >= 2 {
            warnings.push("solution lies on the set where the multiplier tail vanishes".to_string());
        }
        let (alpha, iterations) = solve_sign_level(spec.r, spec.n, spec.a[0], rule);
        let mut lambda = vec![0.0; spec.m];
        lambda[0] = alpha;
        (lambda, iterations, jump_location(spec.r, spec.n, alpha))
    };

    let rcal = moments_rcal(spec, &lambda, rule)?;
    let residual = rcal.iter().zip(&spec.a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    debug!("zero-b solve: lambda = {lambda:?}, residual = {residual:e}");
    if residual >= tol {
        return Err(SchwarzError::Solver {
            message: "zero-b moment residual above tolerance".to_string(),
            residual,
            iterations,
        });
    }
    Ok(LagrangeSolution {
        branch: Branch::ZeroB,
        lambda,
        mu: None,
        residual,
        iterations,
        jump_point,
        warnings,
    })
}

/// Dispatches on the sign of `b`: `b > 0` and `b = 0` are solved directly,
/// `b < 0` is rejected (callers use the symmetry `b ↦ -b`).
pub fn solve(spec: &ProblemSpec, rule: &QuadratureRule) -> Result<LagrangeSolution> {
    if spec.b > 0.0 {
        solve_positive_b(spec, rule, POSITIVE_B_TOL)
    } else if spec.b == 0.0 {
        solve_zero_b(spec, rule, ZERO_B_TOL)
    } else {
        Err(SchwarzError::Branch("b < 0 is handled by reflecting the last coordinate".to_string()))
    }
}

/// Multipliers on the solved path at fixed `μ`: `λ` with `R(λ, μ) = a`.
///
/// Returns `(λ, I(λ, μ))`. The tail of `A` is the constant `γ â_tail`, where
/// `γ` solves `γ I = |a_tail|`.
pub fn lambda_on_path(spec: &ProblemSpec, mu: f64, rule: &QuadratureRule) -> Result<(Vec<f64>, f64)> {
    check_mu(mu)?;
    check_rule(spec, rule)?;
    let tail_norm = spec.tail_norm();
    // For fixed γ the first equation is a monotone problem in λ_1.
    let solve_first = |gamma: f64| -> f64 {
        let scale = (1.0 + gamma * gamma).sqrt() * mu;
        let canonical = Canonical { r: spec.r, n: spec.n, a1: spec.a[0], c: 0.0 };
        canonical.solve_alpha(rule, scale, kernel_profile(spec.r, spec.n, 0.0)).0
    };
    let mass = |alpha: f64, gamma: f64| -> f64 {
        let beta = (1.0 + gamma * gamma).sqrt() * mu;
        canonical_eval(spec.r, spec.n, alpha, beta, rule).f2 / (1.0 + gamma * gamma).sqrt()
    };
    let gamma = if tail_norm == 0.0 {
        0.0
    } else {
        let h = |gamma: f64| gamma * mass(solve_first(gamma), gamma) - tail_norm;
        let (mut lo, mut hi) = (0.0, 1.0);
        while h(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(SchwarzError::Solver {
                    message: "could not bracket the multiplier tail".to_string(),
                    residual: h(hi),
                    iterations: 0,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let alpha = solve_first(gamma);
    let mut lambda = vec![alpha];
    if tail_norm > 0.0 {
        lambda.extend(spec.a[1..].iter().map(|aj| -mu * gamma * aj / tail_norm));
    } else {
        lambda.extend(std::iter::repeat_n(0.0, spec.m - 1));
    }
    let (_, i) = moments_ri(spec, &lambda, mu, rule)?;
    Ok((lambda, i))
}

fn breakpoints_for(spec: &ProblemSpec, lambda1: f64) -> Vec<f64> {
    jump_location(spec.r, spec.n, lambda1).into_iter().collect()
}

fn check_lambda(spec: &ProblemSpec, lambda: &[f64]) -> Result<()> {
    if lambda.len() != spec.m {
        return Err(SchwarzError::domain(format!(
            "λ must have {} components, got {}",
            spec.m,
            lambda.len()
        )));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(SchwarzError::domain(format!("μ must be positive, got {mu}")));
    }
    Ok(())
}

fn check_rule(spec: &ProblemSpec, rule: &QuadratureRule) -> Result<()> {
    if rule.dimension() != spec.n {
        return Err(SchwarzError::domain(format!(
            "quadrature rule is for n = {}, problem has n = {}",
            rule.dimension(),
            spec.n
        )));
    }
    Ok(())
}

/// `∫ sign(g - α) dσ = a1` by bisection on `α ∈ [g(-1), g(1)]`.
fn solve_sign_level(r: f64, n: usize, a1: f64, rule: &QuadratureRule) -> (f64, usize) {
    let value = |alpha: f64| -> f64 {
        match jump_location(r, n, alpha) {
            None if alpha <= kernel_profile(r, n, -1.0) => 1.0,
            None => -1.0,
            Some(t) => {
                let below: f64 = rule
                    .nodes_with_breakpoints(&[t])
                    .into_iter()
                    .filter(|(s, _)| *s < t)
                    .map(|(_, w)| w)
                    .sum();
                1.0 - 2.0 * below
            }
        }
    };
    let mut lo = kernel_profile(r, n, -1.0);
    let mut hi = kernel_profile(r, n, 1.0);
    let mut iterations = 0;
    while iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if value(mid) > a1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi), iterations)
}

#[derive(Clone, Copy, Debug)]
struct CanonicalValues {
    f1: f64,
    f2: f64,
    d1_alpha: f64,
    d1_beta: f64,
    d2_alpha: f64,
    d2_beta: f64,
}

fn canonical_eval(r: f64, n: usize, alpha: f64, beta: f64, rule: &QuadratureRule) -> CanonicalValues {
    let breaks: Vec<f64> = jump_location(r, n, alpha).into_iter().collect();
    let mut v = CanonicalValues { f1: 0.0, f2: 0.0, d1_alpha: 0.0, d1_beta: 0.0, d2_alpha: 0.0, d2_beta: 0.0 };
    let beta_sq = beta * beta;
    for (t, w) in rule.nodes_with_breakpoints(&breaks) {
        let d = kernel_profile(r, n, t) - alpha;
        let q = 1.0 / (d * d + beta_sq).sqrt();
        let q3 = q * q * q;
        v.f1 += w * d * q;
        v.f2 += w * beta * q;
        v.d1_alpha -= w * beta_sq * q3;
        v.d1_beta -= w * d * beta * q3;
        v.d2_alpha += w * beta * d * q3;
        v.d2_beta += w * d * d * q3;
    }
    v
}

/// The reduced two-unknown system shared by every branch with a positive mass.
struct Canonical {
    r: f64,
    n: usize,
    a1: f64,
    c: f64,
}

impl Canonical {
    fn eval(&self, rule: &QuadratureRule, alpha: f64, beta: f64) -> CanonicalValues {
        canonical_eval(self.r, self.n, alpha, beta, rule)
    }

    fn residual(&self, v: &CanonicalValues) -> f64 {
        (v.f1 - self.a1).abs().max((v.f2 - self.c).abs())
    }

    /// Returns `(α, β, iterations)`.
    fn solve(
        &self,
        rule: &QuadratureRule,
        alpha0: f64,
        beta0: f64,
        options: &SolverOptions,
    ) -> Result<(f64, f64, usize)> {
        let target = (options.tol * 1e-3).max(2e-15);
        match self.newton(rule, alpha0, beta0.ln(), options.max_iter, target) {
            Ok(found) => Ok(found),
            Err(err) => {
                debug!("damped Newton failed ({err}); falling back to bracketing");
                let (alpha, beta, its) = self.bracketed(rule, alpha0, beta0, options.max_iter)?;
                // polish jointly
                let polished = self
                    .newton(rule, alpha, beta.ln(), 20, target)
                    .unwrap_or((alpha, beta, 0));
                Ok((polished.0, polished.1, its + polished.2))
            }
        }
    }

    /// Damped Newton in `(α, ln β)` with a backtracking line search.
    fn newton(
        &self,
        rule: &QuadratureRule,
        mut alpha: f64,
        mut log_beta: f64,
        max_iter: usize,
        target: f64,
    ) -> Result<(f64, f64, usize)> {
        let mut v = self.eval(rule, alpha, log_beta.exp());
        let mut res = self.residual(&v);
        let mut stalls = 0;
        for it in 0..max_iter {
            if res <= target {
                return Ok((alpha, log_beta.exp(), it));
            }
            let beta = log_beta.exp();
            // columns: α, ln β
            let j11 = v.d1_alpha;
            let j12 = v.d1_beta * beta;
            let j21 = v.d2_alpha;
            let j22 = v.d2_beta * beta;
            let det = j11 * j22 - j12 * j21;
            if !(det.abs() > 0.0) || !det.is_finite() {
                break;
            }
            let r1 = v.f1 - self.a1;
            let r2 = v.f2 - self.c;
            let mut d_alpha = -(j22 * r1 - j12 * r2) / det;
            let mut d_log = -(-j21 * r1 + j11 * r2) / det;
            // keep steps on the scale of the kernel range
            let alpha_cap = kernel_profile(self.r, self.n, 1.0) + beta;
            let shrink = (2.0 / d_log.abs()).min(alpha_cap / d_alpha.abs()).min(1.0);
            d_alpha *= shrink;
            d_log *= shrink;

            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand_alpha = alpha + step * d_alpha;
                let cand_log = log_beta + step * d_log;
                let cand = self.eval(rule, cand_alpha, cand_log.exp());
                let cand_res = self.residual(&cand);
                if cand_res.is_finite() && cand_res < res {
                    alpha = cand_alpha;
                    log_beta = cand_log;
                    v = cand;
                    res = cand_res;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                stalls += 1;
                if res <= target * 100.0 || stalls > 2 {
                    break;
                }
            }
        }
        if res <= target * 100.0 {
            return Ok((alpha, log_beta.exp(), max_iter));
        }
        Err(SchwarzError::Solver {
            message: "damped Newton stalled".to_string(),
            residual: res,
            iterations: max_iter,
        })
    }

    /// `α(β)` with `F1(α, β) = a1`, by safeguarded Newton on a bracket.
    /// Returns `(α, iterations)`.
    fn solve_alpha(&self, rule: &QuadratureRule, beta: f64, guess: f64) -> (f64, usize) {
        let f = |alpha: f64| {
            let v = canonical_eval(self.r, self.n, alpha, beta, rule);
            (v.f1 - self.a1, v.d1_alpha)
        };
        let g_lo = kernel_profile(self.r, self.n, -1.0);
        let g_hi = kernel_profile(self.r, self.n, 1.0);
        let width = (g_hi - g_lo) + beta;
        let mut lo = g_lo - width;
        let mut hi = g_hi + width;
        let mut expand = width;
        while f(lo).0 < 0.0 && expand < 1e300 {
            expand *= 2.0;
            lo -= expand;
        }
        let mut expand = width;
        while f(hi).0 > 0.0 && expand < 1e300 {
            expand *= 2.0;
            hi += expand;
        }
        let mut x = guess.clamp(lo, hi);
        let mut its = 0;
        for _ in 0..200 {
            its += 1;
            let (fx, dfx) = f(x);
            if fx == 0.0 {
                break;
            }
            // F1 decreasing in α
            if fx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - fx / dfx;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-16 * x.abs().max(1e-300) || hi - lo <= 1e-16 * hi.abs().max(1e-300) {
                x = next;
                break;
            }
            x = next;
        }
        (x, its)
    }

    /// Nested monotone solve: outer bracket on `ln β` for the mass equation,
    /// inner solve for `α(β)`.
    fn bracketed(
        &self,
        rule: &QuadratureRule,
        alpha0: f64,
        beta0: f64,
        max_iter: usize,
    ) -> Result<(f64, f64, usize)> {
        let mut total = 0;
        let mut alpha_guess = alpha0;
        let mut mass = |log_beta: f64, total: &mut usize| -> (f64, f64, f64) {
            let beta = log_beta.exp();
            let (alpha, its) = self.solve_alpha(rule, beta, alpha_guess);
            *total += its;
            alpha_guess = alpha;
            let v = self.eval(rule, alpha, beta);
            // dG/d ln β along the curve F1 = a1
            let dalpha_dbeta = -v.d1_beta / v.d1_alpha;
            let slope = beta * (v.d2_beta + v.d2_alpha * dalpha_dbeta);
            (v.f2 - self.c, slope, alpha)
        };
        let mut lo = beta0.ln();
        let mut hi = lo;
        let mut g_lo = mass(lo, &mut total).0;
        let mut g_hi = g_lo;
        while g_lo > 0.0 {
            lo -= 2.0;
            if lo < -700.0 {
                return Err(SchwarzError::Solver {
                    message: "could not bracket the mass equation from below".to_string(),
                    residual: g_lo,
                    iterations: total,
                });
            }
            g_lo = mass(lo, &mut total).0;
        }
        while g_hi < 0.0 {
            hi += 2.0;
            if hi > 700.0 {
                return Err(SchwarzError::Solver {
                    message: "could not bracket the mass equation from above".to_string(),
                    residual: g_hi,
                    iterations: total,
                });
            }
            g_hi = mass(hi, &mut total).0;
        }
        let mut x = 0.5 * (lo + hi);
        let mut alpha = alpha0;
        for _ in 0..max_iter {
            let (gx, slope, a) = mass(x, &mut total);
            alpha = a;
            if gx.abs() <= 1e-15 {
                break;
            }
            if gx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - gx / slope;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-15 || hi - lo <= 1e-15 {
                x = next;
                alpha = mass(x, &mut total).2;
                break;
            }
            x = next;
        }
        Ok((alpha, x.exp(), total))
    }
}
