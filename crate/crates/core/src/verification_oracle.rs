//! Independent checks of the extremal construction.
//!
//! * A discretized convex program that maximizes `L_r(u) = ∫ P(rN, ω) u_1(ω) dσ`
//!   over the admissible class without using the multiplier system.
//! * Admissible test data and harmonic test maps built from mixtures.
//! * A mean-value harmonicity check and a finite-difference Jacobian check.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Result, SchwarzError};
use crate::extremal_mapping::{boundary_map_shared, eval_general, poisson_on_axis, BoundaryMap, ZonalBoundaryData};
use crate::extremal_solver::{jacobian_ri, moments_ri, ProblemSpec};
use crate::linalg_kernels::{rotation_to_pole, Matrix};
use crate::sphere_quadrature::{axial_poisson_kernel, sample_sphere, zonal_integrate, BiaxialRule, QuadratureRule};

/// Smallest node count accepted by [`discretized_max`].
pub const MIN_NODES: usize = 64;

/// The maximization of `L_r` over `𝒰_{a,b}` on a finite node set.
///
/// Each node carries a lifted variable `z_k = (u_k, v_k)` in the closed unit
/// ball of `R^{m+1}`. The constraints are `Σ w_k u_k = a` and
/// `Σ w_k v_k ≥ |b|`; since `v_k ≤ √(1 - |u_k|²)` on the ball this is the
/// concave constraint `Σ w_k √(1 - |u_k|²) ≥ |b|` in convex form.
#[derive(Clone, Debug)]
pub struct DiscretizedProgram {
    spec: ProblemSpec,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kernel: Vec<f64>,
}

/// Solver controls for [`DiscretizedProgram::solve`].
#[derive(Clone, Debug)]
pub struct OracleOptions {
    /// Target duality gap.
    pub tol: f64,
    /// Multiplier updates per restart.
    pub max_iter: usize,
    pub seed: u64,
    /// Independent starts from random feasible points; the best is kept.
    pub restarts: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 400,
            seed: 0,
            restarts: 10,
        }
    }
}

/// A certified bracket for the discretized optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// Objective at a feasible point.
    pub value: f64,
    /// Lagrangian dual bound; the discretized optimum lies in `[value, upper_bound]`.
    pub upper_bound: f64,
    pub gap: f64,
    /// Largest constraint violation of the returned point.
    pub violation: f64,
    /// Multiplier updates summed over restarts.
    pub iterations: usize,
}

struct Multipliers {
    y: Vec<f64>,
    nu: f64,
}

impl DiscretizedProgram {
    /// Zonal nodes: one variable per latitude of a Gauss-Gegenbauer rule.
    pub fn zonal(spec: &ProblemSpec, node_count: usize) -> Result<Self> {
        if node_count < MIN_NODES {
            return Err(SchwarzError::domain(format!(
                "node count must be at least {MIN_NODES}, got {node_count}"
            )));
        }
        let rule = QuadratureRule::new(spec.n, node_count)?;
        Ok(Self::from_nodes(spec, rule.nodes().to_vec(), rule.weights().to_vec()))
    }

    /// Full-sphere nodes: every latitude of a Gauss-Gegenbauer rule carries a
    /// ring of points with independent variables, so the program is free to
    /// break zonal symmetry. About `sample_count` nodes in total.
    ///
    /// Rings of exact latitudes are used instead of plain Monte Carlo points:
    /// at 200 uniform samples the sampling error of the kernel measure alone
    /// exceeds the agreement this check targets.
    pub fn nonzonal(spec: &ProblemSpec, sample_count: usize) -> Result<Self> {
        let ring = if spec.n == 2 { 2 } else { NONZONAL_RING };
        let latitudes = sample_count / ring;
        if latitudes < 8 {
            return Err(SchwarzError::domain(format!(
                "need at least {} full-sphere nodes, got {sample_count}",
                8 * ring
            )));
        }
        let rule = QuadratureRule::new(spec.n, latitudes)?;
        let mut nodes = Vec::with_capacity(latitudes * ring);
        let mut weights = Vec::with_capacity(latitudes * ring);
        for (t, w) in rule.nodes().iter().zip(rule.weights()) {
            for _ in 0..ring {
                nodes.push(*t);
                weights.push(w / ring as f64);
            }
        }
        Ok(Self::from_nodes(spec, nodes, weights))
    }

    fn from_nodes(spec: &ProblemSpec, nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        let kernel = nodes.iter().map(|&t| axial_poisson_kernel(spec.r, t, spec.n)).collect();
        Self {
            spec: spec.clone(),
            nodes,
            weights,
            kernel,
        }
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn dim(&self) -> usize {
        self.spec.m + 1
    }

    /// `Σ w_k P(rN, t_k) u_{k,1}` for lifted variables stored row by row.
    pub fn objective(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        self.weights
            .iter()
            .zip(&self.kernel)
            .enumerate()
            .map(|(k, (w, p))| w * p * z[k * d])
            .sum()
    }

    /// `(Σ w u, Σ w v)`.
    fn moments(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let d = self.dim();
        let m = self.spec.m;
        let mut mean = vec![0.0; m];
        let mut mass = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            let zk = &z[k * d..(k + 1) * d];
            for (acc, u) in mean.iter_mut().zip(&zk[..m]) {
                *acc += w * u;
            }
            mass += w * zk[m];
        }
        (mean, mass)
    }

    /// Largest violation of the ball, equality and mass constraints.
    pub fn violation(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let (mean, mass) = self.moments(z);
        let eq = mean.iter().zip(&self.spec.a).map(|(x, a)| (x - a).abs()).fold(0.0, f64::max);
        let ineq = (self.spec.b.abs() - mass).max(0.0);
        let ball = z.chunks(d).map(|zk| norm(zk) - 1.0).fold(0.0, f64::max);
        eq.max(ineq).max(ball)
    }

    /// Weak-duality bound `Σ w_k |(P_k e_1 - y, ν)| + ⟨y, a⟩ - ν|b|`.
    fn dual_bound(&self, mult: &Multipliers) -> f64 {
        let m = self.spec.m;
        let mut total = 0.0;
        for (w, p) in self.weights.iter().zip(&self.kernel) {
            let mut sq = mult.nu * mult.nu;
            for j in 0..m {
                let c = if j == 0 { p - mult.y[0] } else { -mult.y[j] };
                sq += c * c;
            }
            total += w * sq.sqrt();
        }
        let ya: f64 = mult.y.iter().zip(&self.spec.a).map(|(y, a)| y * a).sum();
        total + ya - mult.nu * self.spec.b.abs()
    }

    /// Restores exact feasibility: shift `u` to the right mean, then mix with
    /// the interior constant point `(a, β)` just enough to re-enter the ball and
    /// meet the mass constraint.
    fn repair(&self, z: &mut [f64]) {
        let d = self.dim();
        let m = self.spec.m;
        let a = &self.spec.a;
        let b = self.spec.b.abs();
        let (mean, _) = self.moments(z);
        for zk in z.chunks_mut(d) {
            for j in 0..m {
                zk[j] += a[j] - mean[j];
            }
        }
        let a_sq: f64 = a.iter().map(|x| x * x).sum();
        let beta = 0.5 * ((1.0 - a_sq).max(0.0).sqrt() + b);
        let anchor_norm = (a_sq + beta * beta).sqrt();
        let excess = z.chunks(d).map(|zk| norm(zk) - 1.0).fold(0.0, f64::max);
        let mut theta: f64 = 0.0;
        if excess > 0.0 {
            theta = excess / (1.0 + excess - anchor_norm);
        }
        let (_, mass) = self.moments(z);
        if mass < b {
            theta = theta.max((b - mass) / (beta - mass));
        }
        let theta = theta.clamp(0.0, 1.0);
        for zk in z.chunks_mut(d) {
            for j in 0..m {
                zk[j] = (1.0 - theta) * zk[j] + theta * a[j];
            }
            zk[m] = (1.0 - theta) * zk[m] + theta * beta;
            let len = norm(zk);
            if len > 1.0 {
                zk.iter_mut().for_each(|x| *x /= len);
            }
        }
    }

    fn random_feasible(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.dim();
        let mut z = Vec::with_capacity(self.nodes.len() * d);
        for _ in 0..self.nodes.len() {
            let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let len = norm(&dir).max(1e-300);
            let radius = rng.random::<f64>().powf(1.0 / d as f64);
            z.extend(dir.iter().map(|x| radius * x / len));
        }
        self.repair(&mut z);
        z
    }

    /// Augmented-Lagrangian projected ascent with restarts.
    ///
    /// Each inner problem is solved by accelerated projected gradient in the
    /// `diag(w)` metric, where the penalty has curvature `ρ` and the step is
    /// `1/ρ`. After every multiplier update the iterate is repaired to exact
    /// feasibility and compared with the dual bound.
    pub fn solve(&self, opts: &OracleOptions) -> Result<OracleResult> {
        // restarts run concurrently but are combined in index order
        let runs: Vec<_> = (0..opts.restarts.max(1) as u64)
            .into_par_iter()
            .map(|restart| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart));
                self.solve_from(self.random_feasible(&mut rng), opts)
            })
            .collect();
        let mut best: Option<OracleResult> = None;
        let mut upper = f64::INFINITY;
        let mut iterations = 0;
        for (value, bound, iters, violation) in runs {
            iterations += iters;
            upper = upper.min(bound);
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(OracleResult {
                    value,
                    upper_bound: bound,
                    gap: bound - value,
                    violation,
                    iterations: 0,
                });
            }
        }
        let mut result = best.expect("at least one restart");
        result.upper_bound = upper;
        result.gap = (upper - result.value).max(0.0);
        result.iterations = iterations;
        if result.gap > opts.tol {
            return Err(SchwarzError::Oracle {
                message: format!("duality gap above tolerance {:e} after {iterations} updates", opts.tol),
                gap: result.gap,
            });
        }
        Ok(result)
    }

    /// Returns `(feasible value, dual bound, multiplier updates, violation)`.
    fn solve_from(&self, mut z: Vec<f64>, opts: &OracleOptions) -> (f64, f64, usize, f64) {
        let d = self.dim();
        let m = self.spec.m;
        let a = &self.spec.a;
        let b = self.spec.b.abs();
        let scale = self.weights.iter().zip(&self.kernel).map(|(w, p)| w * p).sum::<f64>();
        let mut rho = scale.max(1.0);
        let mut mult = Multipliers { y: vec![0.0; m], nu: 0.0 };
        let mut best_value = f64::NEG_INFINITY;
        let mut best_violation = 0.0;
        let mut best_bound = f64::INFINITY;
        let mut last_violation = f64::INFINITY;
        let mut grad = vec![0.0; d];
        let mut next = vec![0.0; d];
        let mut updates = 0;

        for _ in 0..opts.max_iter {
            updates += 1;
            // accelerated projected gradient on the augmented Lagrangian
            let mut prev = z.clone();
            let mut look = z.clone();
            let mut t_acc = 1.0_f64;
            for _ in 0..INNER_ITERATIONS {
                let (mean, mass) = self.moments(&look);
                let push = (mult.nu + rho * (b - mass)).max(0.0);
                let mut change = 0.0;
                for (k, p) in self.kernel.iter().enumerate() {
                    let lk = &look[k * d..(k + 1) * d];
                    for j in 0..m {
                        let obj = if j == 0 { *p } else { 0.0 };
                        grad[j] = obj - mult.y[j] - rho * (mean[j] - a[j]);
                    }
                    grad[m] = push;
                    for (nx, (x, g)) in next.iter_mut().zip(lk.iter().zip(&grad)) {
                        *nx = x + g / rho;
                    }
                    let len = norm(&next);
                    if len > 1.0 {
                        next.iter_mut().for_each(|x| *x /= len);
                    }
                    let zk = &mut z[k * d..(k + 1) * d];
                    for (dst, src) in zk.iter_mut().zip(&next) {
                        change += self.weights[k] * (src - *dst) * (src - *dst);
                        *dst = *src;
                    }
                }
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
                let momentum = (t_acc - 1.0) / t_next;
                for ((l, zn), zp) in look.iter_mut().zip(&z).zip(&prev) {
                    *l = zn + momentum * (zn - zp);
                }
                prev.copy_from_slice(&z);
                t_acc = t_next;
                if change.sqrt() < INNER_TOL {
                    break;
                }
            }

            let (mean, mass) = self.moments(&z);
            for j in 0..m {
                mult.y[j] += rho * (mean[j] - a[j]);
            }
            mult.nu = (mult.nu + rho * (b - mass)).max(0.0);

            let violation = mean
                .iter()
                .zip(a)
                .map(|(x, y)| (x - y).abs())
                .fold((b - mass).max(0.0), f64::max);
            if violation > 0.25 * last_violation {
                rho *= 2.0;
            }
            last_violation = violation;

            let mut feasible = z.clone();
            self.repair(&mut feasible);
            let value = self.objective(&feasible);
            if value > best_value {
                best_value = value;
                best_violation = self.violation(&feasible);
            }
            best_bound = best_bound.min(self.dual_bound(&mult));
            if best_bound - best_value <= 0.25 * opts.tol {
                break;
            }
        }
        (best_value, best_bound, updates, best_violation)
    }
}

const INNER_ITERATIONS: usize = 100;
const INNER_TOL: f64 = 1e-12;
const NONZONAL_RING: usize = 5;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Discretized maximum of `L_r` over zonal admissible data at `node_count`
/// latitudes, with the default ten restarts.
pub fn discretized_max(spec: &ProblemSpec, node_count: usize, tol: f64, max_iter: usize, seed: u64) -> Result<OracleResult> {
    DiscretizedProgram::zonal(spec, node_count)?.solve(&OracleOptions {
        tol,
        max_iter,
        seed,
        ..OracleOptions::default()
    })
}

/// The same program on full-sphere rings of nodes; checks that the zonal
/// restriction loses nothing.
pub fn nonzonal_max(spec: &ProblemSpec, sample_count: usize, tol: f64, max_iter: usize, seed: u64) -> Result<OracleResult> {
    DiscretizedProgram::nonzonal(spec, sample_count)?.solve(&OracleOptions {
        tol,
        max_iter,
        seed,
        ..OracleOptions::default()
    })
}

/// One ingredient of an admissible mixture.
#[derive(Clone, Debug)]
pub enum MixtureComponent {
    /// `u` part of an extremal map with the same `a` and `|b'| ≥ |b|`.
    Extremal(BoundaryMap),
    /// `u ≡ a`.
    Constant,
}

/// Convex combination of admissible boundary data; zonal with `m` components.
#[derive(Clone, Debug)]
pub struct AdmissibleMixture {
    spec: ProblemSpec,
    components: Vec<(MixtureComponent, f64)>,
    breakpoints: Vec<f64>,
}

/// Validates and assembles a mixture.
///
/// `∫u = a` holds by linearity and `∫√(1-|u|²) ≥ |b|` by concavity of
/// `x ↦ √(1-|x|²)`.
pub fn admissible_mixture(spec: &ProblemSpec, components: Vec<(MixtureComponent, f64)>) -> Result<AdmissibleMixture> {
    if components.is_empty() {
        return Err(SchwarzError::domain("mixture needs at least one component"));
    }
    if components.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
        return Err(SchwarzError::domain("mixture weights must be nonnegative"));
    }
    let total: f64 = components.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(SchwarzError::domain(format!("mixture weights must sum to 1, got {total}")));
    }
    let mut breakpoints = Vec::new();
    for (component, _) in &components {
        if let MixtureComponent::Extremal(map) = component {
            let other = map.spec();
            let same_a = other.a.len() == spec.a.len()
                && other.a.iter().zip(&spec.a).all(|(x, y)| (x - y).abs() <= 1e-12);
            if other.n != spec.n || other.m != spec.m || !same_a {
                return Err(SchwarzError::domain("mixture component has a different n, m or a"));
            }
            if other.b.abs() < spec.b.abs() - 1e-12 {
                return Err(SchwarzError::domain("mixture component has |b'| < |b|"));
            }
            breakpoints.extend(map.breakpoints());
        }
    }
    Ok(AdmissibleMixture {
        spec: spec.clone(),
        components,
        breakpoints,
    })
}

impl ZonalBoundaryData for AdmissibleMixture {
    fn dimension(&self) -> usize {
        self.spec.n
    }

    fn components(&self) -> usize {
        self.spec.m
    }

    fn value_into(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut sample = vec![0.0; self.spec.m + 1];
        for (component, w) in &self.components {
            match component {
                MixtureComponent::Constant => {
                    for (o, a) in out.iter_mut().zip(&self.spec.a) {
                        *o += w * a;
                    }
                }
                MixtureComponent::Extremal(map) => {
                    map.value_into(t, &mut sample);
                    for (o, s) in out.iter_mut().zip(&sample) {
                        *o += w * s;
                    }
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

impl AdmissibleMixture {
    /// `L_r(u) = ⟨U(rN), e_1⟩` at the spec radius.
    pub fn functional(&self, rule: &QuadratureRule) -> Result<f64> {
        Ok(poisson_on_axis(self, self.spec.r, rule)?.value[0])
    }

    /// `∫u dσ`.
    pub fn mean(&self, rule: &QuadratureRule) -> Result<Vec<f64>> {
        (0..self.spec.m)
            .map(|j| zonal_integrate(rule, |t| self.value(t)[j], &self.breakpoints))
            .collect()
    }

    /// `∫√(1 - |u|²) dσ`.
    pub fn vertical_mass(&self, rule: &QuadratureRule) -> Result<f64> {
        zonal_integrate(
            rule,
            |t| (1.0 - self.value(t).iter().map(|x| x * x).sum::<f64>()).max(0.0).sqrt(),
            &self.breakpoints,
        )
    }
}

/// `x ↦ F_{c Q, r'}(x A) Q` for reflections `Q` (target) and `A` (domain);
/// harmonic, into the ball, and equal to `c` at the origin.
#[derive(Clone, Debug)]
pub struct RotatedExtremal {
    pub map: BoundaryMap,
    pub target: Matrix,
    pub domain: Matrix,
}

impl RotatedExtremal {
    pub fn eval(&self, x: &[f64], rule: &BiaxialRule) -> Result<Vec<f64>> {
        let moved = self.domain.left_mul(x);
        let value = eval_general(&self.map, &moved, rule)?.value;
        Ok(self.target.left_mul(&value))
    }
}

/// Convex combination of rotated extremal maps and the constant map.
#[derive(Clone, Debug)]
pub struct HarmonicMixture {
    center: Vec<f64>,
    parts: Vec<(RotatedExtremal, f64)>,
    constant_weight: f64,
}

impl HarmonicMixture {
    /// `parts` random rotated extremal maps with radii in `[0.05, 0.95]` and
    /// random weights, all centered at `(a, b)`.
    pub fn random(spec: &ProblemSpec, parts: usize, seed: u64, rule: Arc<QuadratureRule>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = spec.center();
        let mut raw_weights: Vec<f64> = (0..=parts).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw_weights.iter().sum();
        raw_weights.iter_mut().for_each(|w| *w /= total);
        let mut built = Vec::with_capacity(parts);
        for weight in raw_weights.iter().take(parts) {
            let e = random_unit(spec.m + 1, &mut rng);
            let target = rotation_to_pole(&e)?;
            let mut rotated = target.left_mul(&center);
            let b = rotated.pop().unwrap_or(0.0);
            let radius = rng.random_range(0.05..0.95);
            let component_spec = ProblemSpec::new(spec.n, spec.m, radius, rotated, b)?;
            let map = boundary_map_shared(&component_spec, rule.clone())?;
            let domain = rotation_to_pole(&random_unit(spec.n, &mut rng))?;
            built.push((RotatedExtremal { map, target, domain }, *weight));
        }
        Ok(Self {
            center,
            parts: built,
            constant_weight: raw_weights[parts],
        })
    }

    /// Adds a component with the given weight, rescaling the others.
    pub fn with_part(mut self, part: RotatedExtremal, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(SchwarzError::domain("mixture weight must lie in [0, 1]"));
        }
        self.parts.iter_mut().for_each(|(_, w)| *w *= 1.0 - weight);
        self.constant_weight *= 1.0 - weight;
        self.parts.push((part, weight));
        Ok(self)
    }

    pub fn eval(&self, x: &[f64], rule: &BiaxialRule) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = self.center.iter().map(|c| self.constant_weight * c).collect();
        for (part, w) in &self.parts {
            for (o, v) in out.iter_mut().zip(part.eval(x, rule)?) {
                *o += w * v;
            }
        }
        Ok(out)
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-8 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Seeded points in the closed ball of radius `radius` in `R^n`, uniform in
/// volume.
pub fn sample_ball(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir = random_unit(n, &mut rng);
            let rho = radius * rng.random::<f64>().powf(1.0 / n as f64);
            dir.into_iter().map(|x| rho * x).collect()
        })
        .collect()
}

/// `‖mean of f over the sphere |y - x| = s - f(x)‖` with antithetic probe
/// pairs `x ± sω`.
///
/// Pairing cancels the linear term exactly, so a harmonic `f` leaves only
/// sampling noise at order `s²`, while adding `|x|²` to one component shifts
/// the mean by exactly `s²`.
pub fn mean_value_residual<F>(evaluator: F, x: &[f64], s: f64, probe_count: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(s > 0.0) {
        return Err(SchwarzError::domain("probe radius must be positive"));
    }
    if norm(x) + s >= 1.0 {
        return Err(SchwarzError::domain("probe sphere must lie inside the unit ball"));
    }
    let pairs = probe_count.div_ceil(2).max(1);
    let directions = sample_sphere(x.len(), pairs, seed)?;
    let center = evaluator(x)?;
    let mut mean = vec![0.0; center.len()];
    let mut probe = vec![0.0; x.len()];
    for omega in &directions {
        for sign in [1.0, -1.0] {
            for ((p, xi), oi) in probe.iter_mut().zip(x).zip(omega) {
                *p = xi + sign * s * oi;
            }
            for (acc, v) in mean.iter_mut().zip(evaluator(&probe)?) {
                *acc += v;
            }
        }
    }
    let count = (2 * pairs) as f64;
    Ok(mean
        .iter()
        .zip(&center)
        .map(|(acc, c)| (acc / count - c).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Largest `|analytic - central difference| / (1 + |analytic|)` over the
/// entries of the `(R, I)` Jacobian.
pub fn jacobian_fd_check(spec: &ProblemSpec, lambda: &[f64], mu: f64, rule: &QuadratureRule, step: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(SchwarzError::domain("μ must be positive"));
    }
    if !(1e-8..=1e-4).contains(&step) {
        return Err(SchwarzError::domain("finite-difference step must lie in [1e-8, 1e-4]"));
    }
    let m = spec.m;
    let analytic = jacobian_ri(spec, lambda, mu, rule)?;
    let eval = |lam: &[f64], mu: f64| -> Result<Vec<f64>> {
        let (mut r, i) = moments_ri(spec, lam, mu, rule)?;
        r.push(i);
        Ok(r)
    };
    let mut worst: f64 = 0.0;
    for col in 0..=m {
        let (plus, minus) = if col < m {
            let mut lp = lambda.to_vec();
            let mut lm = lambda.to_vec();
            lp[col] += step;
            lm[col] -= step;
            (eval(&lp, mu)?, eval(&lm, mu)?)
        } else {
            (eval(lambda, mu + step)?, eval(lambda, mu - step)?)
        };
        for row in 0..=m {
            let fd = (plus[row] - minus[row]) / (2.0 * step);
            let exact = analytic[(row, col)];
            worst = worst.max((exact - fd).abs() / (1.0 + exact.abs()));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extremal_mapping::{boundary_map, eval_on_axis};
    use crate::schwarz_bounds::axis_bound;
    use std::f64::consts::PI;

    fn rule(n: usize) -> Arc<QuadratureRule> {
        Arc::new(QuadratureRule::new(n, 256).unwrap())
    }

    #[test]
    fn oracle_matches_heinz_value() {
        let spec = ProblemSpec::new(2, 1, 0.5, vec![0.0], 0.0).unwrap();
        let res = discretized_max(&spec, 512, 1e-4, 400, 1).unwrap();
        assert!(res.gap <= 1e-4 && res.violation < 1e-9);
        assert!((res.value - 4.0 / PI * 0.5f64.atan()).abs() < 5e-3, "{res:?}");
    }

    #[test]
    fn oracle_matches_closed_form_with_tail() {
        let spec = ProblemSpec::new(3, 2, 0.4, vec![0.2, 0.3], 0.1).unwrap();
        let res = discretized_max(&spec, 256, 1e-4, 400, 2).unwrap();
        let closed = axis_bound(&spec, rule(3)).unwrap().value;
        assert!((res.value - closed).abs() < 5e-3, "{res:?} vs {closed}");
    }

    #[test]
    fn full_sphere_program_agrees_with_closed_form() {
        let spec = ProblemSpec::new(3, 2, 0.5, vec![0.2, 0.1], 0.3).unwrap();
        let res = nonzonal_max(&spec, 200, 1e-4, 400, 3).unwrap();
        let closed = axis_bound(&spec, rule(3)).unwrap().value;
        assert!((res.value - closed).abs() < 2e-2, "{res:?} vs {closed}");
        assert!(DiscretizedProgram::nonzonal(&spec, 20).is_err());
    }

    #[test]
    fn oracle_rejects_few_nodes() {
        let spec = ProblemSpec::new(2, 1, 0.5, vec![0.0], 0.0).unwrap();
        assert!(discretized_max(&spec, 32, 1e-4, 10, 0).is_err());
    }

    #[test]
    fn oracle_reports_gap_when_starved() {
        let spec = ProblemSpec::new(3, 1, 0.8, vec![0.1], 0.3).unwrap();
        match DiscretizedProgram::zonal(&spec, 128).unwrap().solve(&OracleOptions {
            tol: 1e-12,
            max_iter: 1,
            seed: 0,
            restarts: 1,
        }) {
            Err(SchwarzError::Oracle { gap, .. }) => assert!(gap > 0.0),
            other => panic!("expected an oracle error, got {other:?}"),
        }
    }

    #[test]
    fn repaired_points_are_feasible() {
        let spec = ProblemSpec::new(3, 2, 0.6, vec![0.3, -0.2], 0.5).unwrap();
        let program = DiscretizedProgram::zonal(&spec, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = program.random_feasible(&mut rng);
        assert!(program.violation(&z) < 1e-12);
    }

    #[test]
    fn mixture_admissibility_and_strict_gap() {
        let spec = ProblemSpec::new(3, 2, 0.5, vec![0.2, 0.1], 0.3).unwrap();
        let q = rule(3);
        let extremal = boundary_map(&spec, &q).unwrap();
        let bound = eval_on_axis(&extremal, spec.r).unwrap().value[0];

        let single = admissible_mixture(&spec, vec![(MixtureComponent::Extremal(extremal.clone()), 1.0)]).unwrap();
        assert!((single.functional(&q).unwrap() - bound).abs() < 1e-12);

        let half = admissible_mixture(
            &spec,
            vec![(MixtureComponent::Extremal(extremal.clone()), 0.5), (MixtureComponent::Constant, 0.5)],
        )
        .unwrap();
        assert!(half.functional(&q).unwrap() < bound - 1e-6);
        let mean = half.mean(&q).unwrap();
        assert!((mean[0] - 0.2).abs() < 1e-10 && (mean[1] - 0.1).abs() < 1e-10);
        assert!(half.vertical_mass(&q).unwrap() >= 0.3 - 1e-10);

        let other = boundary_map(&spec.with_radius(0.2).unwrap(), &q).unwrap();
        let two = admissible_mixture(
            &spec,
            vec![(MixtureComponent::Extremal(other), 0.5), (MixtureComponent::Extremal(extremal), 0.5)],
        )
        .unwrap();
        assert!(two.functional(&q).unwrap() < bound - 1e-6);
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        let spec = ProblemSpec::new(2, 1, 0.5, vec![0.2], 0.3).unwrap();
        assert!(admissible_mixture(&spec, vec![]).is_err());
        assert!(admissible_mixture(&spec, vec![(MixtureComponent::Constant, 0.5)]).is_err());
        assert!(admissible_mixture(
            &spec,
            vec![(MixtureComponent::Constant, 1.5), (MixtureComponent::Constant, -0.5)]
        )
        .is_err());
        let low_b = boundary_map(&spec.with_center(vec![0.2], 0.1).unwrap(), &rule(2)).unwrap();
        assert!(admissible_mixture(&spec, vec![(MixtureComponent::Extremal(low_b), 1.0)]).is_err());
    }

    #[test]
    fn harmonic_mixture_keeps_center() {
        let spec = ProblemSpec::new(3, 2, 0.5, vec![0.2, -0.1], 0.3).unwrap();
        let mix = HarmonicMixture::random(&spec, 3, 4, rule(3)).unwrap();
        let biax = BiaxialRule::new(3, 96, 48).unwrap();
        let at_zero = mix.eval(&[0.0, 0.0, 0.0], &biax).unwrap();
        for (x, y) in at_zero.iter().zip(spec.center()) {
            assert!((x - y).abs() < 1e-9);
        }
        let inside = mix.eval(&[0.3, -0.2, 0.4], &biax).unwrap();
        assert!(norm(&inside) < 1.0);
    }

    #[test]
    fn mean_value_cases() {
        let x = [0.2, -0.1, 0.3];
        let constant = mean_value_residual(|_| Ok(vec![0.4, -0.2]), &x, 0.05, 64, 1).unwrap();
        assert!(constant < 1e-14);
        let quad = |y: &[f64]| Ok(vec![y[0] * y[1], y[0] * y[0] - y[2] * y[2]]);
        assert!(mean_value_residual(quad, &x, 0.05, 2048, 1).unwrap() < 1e-4);
        let bowl = |y: &[f64]| Ok(vec![y.iter().map(|v| v * v).sum::<f64>()]);
        let defect = mean_value_residual(bowl, &x, 0.05, 16, 1).unwrap();
        assert!((defect - 0.0025).abs() < 1e-12);
        assert!(mean_value_residual(|_| Ok(vec![0.0]), &[0.9, 0.0, 0.0], 0.2, 8, 1).is_err());
    }

    #[test]
    fn finite_difference_jacobian() {
        let spec = ProblemSpec::new(3, 2, 0.6, vec![0.1, 0.2], 0.3).unwrap();
        let err = jacobian_fd_check(&spec, &[0.3, -0.4], 0.8, &rule(3), 1e-6).unwrap();
        assert!(err < 1e-5, "{err}");
        assert!(jacobian_fd_check(&spec, &[0.3, -0.4], 0.0, &rule(3), 1e-6).is_err());
        assert!(jacobian_fd_check(&spec, &[0.3, -0.4], 0.8, &rule(3), 1e-2).is_err());
    }
}
