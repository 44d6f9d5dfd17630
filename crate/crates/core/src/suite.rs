//! The acceptance suite: eleven seeded, self-contained checks of the whole
//! pipeline. Each check reports its measured quantity next to the threshold
//! it is held to.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::extremal_mapping::{boundary_map_shared, eval_general};
use crate::extremal_solver::{jacobian_ri, lambda_on_path, moments_rcal, moments_ri, solve, Branch, ProblemSpec};
use crate::linalg_kernels::{bordered_det, cramer_ratio, taylor_gap, BorderedMatrixSpec, Matrix};
use crate::schwarz_bounds::{axis_bound, directional_bound, region_envelope, DirectionScheme};
use crate::sphere_quadrature::{BiaxialRule, QuadratureRule, DEFAULT_ORDER};
use crate::verification_oracle::{
    discretized_max, jacobian_fd_check, mean_value_residual, sample_ball, HarmonicMixture, RotatedExtremal,
};

/// Criterion names in suite order.
pub const CRITERIA: [&str; 11] = [
    "heinz",
    "moments",
    "oracle",
    "jacobian",
    "determinants",
    "signs",
    "sharpness",
    "containment",
    "limits",
    "taylor",
    "harmonicity",
];

/// Knobs shared by all criteria.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    /// Latitude count of the discretized oracle.
    pub oracle_nodes: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            oracle_nodes: 2048,
            seed: 20_240_601,
        }
    }
}

/// Outcome of one criterion.
#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    /// The quantity compared with `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:>2} {:<12} measured {:.3e} threshold {:.1e} ({:.2} s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.threshold,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Runs one criterion by name or all of them for `"full"`. Unknown names
/// yield `None`.
pub fn run_suite(selection: &str, config: &SuiteConfig) -> Option<Vec<CriterionReport>> {
    if selection == "full" {
        return Some(CRITERIA.iter().map(|name| run_criterion(name, config)).collect());
    }
    CRITERIA
        .contains(&selection)
        .then(|| vec![run_criterion(selection, config)])
}

/// Runs a single criterion; errors inside it become a failed report.
pub fn run_criterion(name: &str, config: &SuiteConfig) -> CriterionReport {
    let id = CRITERIA.iter().position(|c| *c == name).map_or(0, |i| i + 1);
    let static_name = CRITERIA.get(id.wrapping_sub(1)).copied().unwrap_or("unknown");
    let start = Instant::now();
    let outcome = match name {
        "heinz" => heinz(),
        "moments" => moments(config.seed),
        "oracle" => oracle(config),
        "jacobian" => jacobian(config.seed),
        "determinants" => determinants(config.seed),
        "signs" => signs(config.seed),
        "sharpness" => sharpness(config.seed),
        "containment" => containment(config.seed),
        "limits" => limits(config.seed),
        "taylor" => taylor(config.seed),
        "harmonicity" => harmonicity(config.seed),
        _ => Ok(Check::fail(f64::NAN, f64::NAN, format!("unknown criterion `{name}`"))),
    };
    let elapsed = start.elapsed();
    let mut check = outcome.unwrap_or_else(|err| Check::fail(f64::NAN, f64::NAN, format!("error: {err}")));
    if let Some(budget) = check.budget {
        if elapsed > budget {
            check.passed = false;
            check.detail = format!("{}; exceeded the {} s budget", check.detail, budget.as_secs());
        }
    }
    CriterionReport {
        id,
        name: static_name,
        passed: check.passed,
        measured: check.measured,
        threshold: check.threshold,
        detail: check.detail,
        elapsed,
    }
}

struct Check {
    passed: bool,
    measured: f64,
    threshold: f64,
    detail: String,
    budget: Option<Duration>,
}

impl Check {
    /// Passes when `measured < threshold`.
    fn below(measured: f64, threshold: f64, detail: String) -> Self {
        Self {
            passed: measured < threshold,
            measured,
            threshold,
            detail,
            budget: None,
        }
    }

    fn fail(measured: f64, threshold: f64, detail: String) -> Self {
        Self {
            passed: false,
            measured,
            threshold,
            detail,
            budget: None,
        }
    }

    fn within(mut self, seconds: u64) -> Self {
        self.budget = Some(Duration::from_secs(seconds));
        self
    }
}

fn rule(n: usize) -> Result<Arc<QuadratureRule>> {
    Ok(Arc::new(QuadratureRule::new(n, DEFAULT_ORDER)?))
}

/// Random center with `|(a, b)| ≤ max_radius`, returned as `(a, b)`.
fn random_center(rng: &mut ChaCha8Rng, m: usize, max_radius: f64) -> (Vec<f64>, f64) {
    let raw: Vec<f64> = (0..=m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let len = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    let radius = rng.random_range(0.0..max_radius);
    let mut c: Vec<f64> = raw.into_iter().map(|x| x * radius / len).collect();
    let b = c.pop().unwrap_or(0.0);
    (c, b)
}

fn random_spec(rng: &mut ChaCha8Rng, n_range: (usize, usize), m_range: (usize, usize), zero_b: bool) -> Result<ProblemSpec> {
    let n = rng.random_range(n_range.0..=n_range.1);
    let m = rng.random_range(m_range.0..=m_range.1);
    let r = rng.random_range(0.1..0.9);
    let (a, b) = random_center(rng, m, 0.9);
    let b = if zero_b { 0.0 } else { b.abs().max(1e-3) };
    ProblemSpec::new(n, m, r, a, b)
}

fn heinz() -> Result<Check> {
    let q = rule(2)?;
    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let r = k as f64 / 10.0;
        let spec = ProblemSpec::new(2, 1, r, vec![0.0], 0.0)?;
        let value = axis_bound(&spec, q.clone())?.value;
        worst = worst.max((value - 4.0 / PI * r.atan()).abs());
    }
    Ok(Check::below(worst, 1e-8, "max |axis_bound - (4/π) atan r| over r = 0.1..0.9".into()).within(1))
}

fn moments(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rules: Vec<Arc<QuadratureRule>> = (2..=4).map(rule).collect::<Result<_>>()?;
    let (mut worst_pos, mut worst_zero): (f64, f64) = (0.0, 0.0);
    for i in 0..50 {
        let spec = random_spec(&mut rng, (2, 4), (1, 3), i % 5 == 0)?;
        let q = &rules[spec.n - 2];
        let sol = solve(&spec, q)?;
        match sol.branch {
            Branch::PositiveB => {
                let (r, moment) = moments_ri(&spec, &sol.lambda, sol.mu.unwrap_or(f64::NAN), q)?;
                let res = r.iter().zip(&spec.a).map(|(x, y)| (x - y).abs()).fold((moment - spec.b).abs(), f64::max);
                worst_pos = worst_pos.max(res);
            }
            Branch::ZeroB => {
                let r = moments_rcal(&spec, &sol.lambda, q)?;
                let res = r.iter().zip(&spec.a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                worst_zero = worst_zero.max(res);
            }
        }
    }
    // report the worst ratio to the branch threshold
    let ratio = (worst_pos / 1e-10).max(worst_zero / 1e-8);
    Ok(Check::below(
        ratio,
        1.0,
        format!("50 specs; max residual {worst_pos:.2e} (b > 0, limit 1e-10), {worst_zero:.2e} (b = 0, limit 1e-8); measured is the worst ratio to its limit"),
    )
    .within(30))
}

fn oracle(config: &SuiteConfig) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x03);
    let mut worst: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for i in 0..10 {
        let spec = random_spec(&mut rng, (2, 4), (1, 3), i % 3 == 0)?;
        let closed = axis_bound(&spec, rule(spec.n)?)?.value;
        let res = discretized_max(&spec, config.oracle_nodes, 1e-4, 400, config.seed.wrapping_add(i))?;
        worst = worst.max((res.value - closed).abs());
        worst_gap = worst_gap.max(res.gap);
    }
    Ok(Check {
        passed: worst <= 5e-3,
        measured: worst,
        threshold: 5e-3,
        detail: format!(
            "10 specs, {} nodes; max |oracle - axis_bound| (largest duality gap {worst_gap:.1e})",
            config.oracle_nodes
        ),
        budget: None,
    }
    .within(120))
}

fn random_point(rng: &mut ChaCha8Rng, m: usize) -> (Vec<f64>, f64) {
    let lambda: Vec<f64> = (0..m)
        .map(|j| {
            let x: f64 = rng.random_range(-1.0..1.0);
            // keep the tail away from zero
            if j > 0 && x.abs() < 0.1 {
                x.signum() * 0.1 + x
            } else {
                x
            }
        })
        .collect();
    (lambda, rng.random_range(0.2..2.0))
}

fn jacobian(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x04);
    let mut worst_fd: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for _ in 0..20 {
        let spec = random_spec(&mut rng, (2, 4), (1, 3), false)?;
        let q = rule(spec.n)?;
        let (lambda, mu) = random_point(&mut rng, spec.m);
        worst_fd = worst_fd.max(jacobian_fd_check(&spec, &lambda, mu, &q, 1e-6)?);
        let jac = jacobian_ri(&spec, &lambda, mu, &q)?;
        let m = spec.m;
        for j in 0..m {
            worst_identity = worst_identity.max((jac[(j, m)] + jac[(m, j)]).abs());
        }
    }
    let passed = worst_fd < 1e-5 && worst_identity < 1e-12;
    Ok(Check {
        passed,
        measured: worst_fd,
        threshold: 1e-5,
        detail: format!("20 points; max |R_jμ + I_j| = {worst_identity:.2e} (limit 1e-12)"),
        budget: None,
    })
}

fn determinants(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05);
    let mut worst_det: f64 = 0.0;
    for _ in 0..200 {
        let p = rng.random_range(2..=8);
        let spec = BorderedMatrixSpec {
            b: rng.random_range(-2.0..2.0),
            a11: rng.random_range(-2.0..2.0),
            c: (0..p).map(|_| rng.random_range(-1.5..1.5)).collect(),
        };
        let dense = spec.to_dense().determinant();
        let closed = bordered_det(&spec);
        worst_det = worst_det.max((closed - dense).abs() / dense.abs().max(1e-300).max(closed.abs()));
    }
    let mut worst_cramer: f64 = 0.0;
    let mut done = 0;
    while done < 200 {
        let k = rng.random_range(1..=6);
        let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let a = Matrix::from_rows(&rows)?;
        if a.determinant().abs() < 1e-3 {
            continue;
        }
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
        let Some(x) = a.solve(&neg_b) else { continue };
        let c: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c_last = rng.random_range(-1.0..1.0);
        let (lhs, rhs) = cramer_ratio(&a, &x, &b, &c, c_last)?;
        worst_cramer = worst_cramer.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        done += 1;
    }
    let measured = worst_det.max(worst_cramer);
    Ok(Check::below(
        measured,
        1e-9,
        format!("200 bordered determinants (max rel {worst_det:.1e}), 200 Cramer ratios (max rel {worst_cramer:.1e})"),
    ))
}

fn signs(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x06);
    let mut worst_minor = f64::NEG_INFINITY;
    let mut worst_full = f64::INFINITY;
    for _ in 0..20 {
        let spec = random_spec(&mut rng, (2, 4), (2, 3), false)?;
        let q = rule(spec.n)?;
        let (lambda, mu) = random_point(&mut rng, spec.m);
        let jac = jacobian_ri(&spec, &lambda, mu, &q)?;
        let m = spec.m;
        for k in 1..m {
            let ratio = jac.leading(k + 1).determinant() / jac.leading(k).determinant();
            worst_minor = worst_minor.max(ratio);
        }
        worst_full = worst_full.min(jac.determinant() / jac.leading(m).determinant());
    }
    Ok(Check {
        passed: worst_minor < 0.0 && worst_full > 0.0,
        measured: worst_minor,
        threshold: 0.0,
        detail: format!("20 points; largest leading-minor ratio (must be < 0), smallest bordered ratio {worst_full:.3e} (must be > 0)"),
        budget: None,
    })
}

fn sharpness(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x07);
    let mut worst_reproduce: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    for i in 0..10 {
        let spec = random_spec(&mut rng, (2, 4), (1, 3), i % 4 == 0)?;
        let (a, b) = random_center(&mut rng, spec.m, 0.9);
        let spec = spec.with_center(a, if i % 4 == 0 { 0.0 } else { b })?;
        let e = unit(&mut rng, spec.m + 1);
        let q = rule(spec.n)?;
        let bound = directional_bound(&spec, &e, q)?;
        let biax = BiaxialRule::new(spec.n, DEFAULT_ORDER, 128)?;
        let mut pole = vec![0.0; spec.n];
        pole[spec.n - 1] = spec.r;
        let at_pole = eval_general(&bound.witness, &pole, &biax)?.value[0];
        worst_reproduce = worst_reproduce.max((at_pole - bound.value).abs());
        let interior = BiaxialRule::new(spec.n, 256, 64)?;
        for x in sample_ball(spec.n, 100, spec.r, seed.wrapping_add(i)) {
            let value = eval_general(&bound.witness, &x, &interior)?.value[0];
            min_margin = min_margin.min(bound.value - value);
        }
    }
    Ok(Check {
        passed: worst_reproduce < 1e-9 && min_margin > 0.0,
        measured: worst_reproduce,
        threshold: 1e-9,
        detail: format!("10 (spec, e) pairs; smallest interior margin {min_margin:.3e} (must be > 0)"),
        budget: None,
    })
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 0.1 && len <= 1.0 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

fn containment(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x08);
    let mut min_slack = f64::INFINITY;
    let mut maps = 0;
    for s in 0..4 {
        let spec = random_spec(&mut rng, (2, 4), (1, 3), s == 0)?;
        let q = rule(spec.n)?;
        let scheme = DirectionScheme::auto(spec.m + 1, 48, seed.wrapping_add(s));
        let envelope = region_envelope(&spec, &scheme, q.clone())?;
        let biax = BiaxialRule::new(spec.n, 256, 64)?;
        for j in 0..5 {
            let map_seed = seed.wrapping_add(100 * s + j);
            let mixture = if j == 0 {
                // the witness itself touches the envelope at rN
                let e = envelope.halfspaces[0].e.clone();
                let witness = directional_bound(&spec, &e, q.clone())?.witness;
                let part = RotatedExtremal {
                    map: witness,
                    target: crate::linalg_kernels::rotation_to_pole(&e)?,
                    domain: Matrix::identity(spec.n),
                };
                HarmonicMixture::random(&spec, 0, map_seed, q.clone())?.with_part(part, 1.0)?
            } else {
                HarmonicMixture::random(&spec, 1 + j as usize, map_seed, q.clone())?
            };
            let mut points = sample_ball(spec.n, 40, spec.r, map_seed);
            // points on the sphere |x| = r
            points.extend(sample_ball(spec.n, 20, 1.0, map_seed ^ 1).into_iter().map(|x| {
                let len = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                x.into_iter().map(|v| v * spec.r / len).collect()
            }));
            let mut pole = vec![0.0; spec.n];
            pole[spec.n - 1] = spec.r;
            points.push(pole);
            for x in points {
                let y = mixture.eval(&x, &biax)?;
                min_slack = min_slack.min(envelope.slack(&y));
            }
            maps += 1;
        }
    }
    Ok(Check {
        passed: min_slack >= -1e-6,
        measured: min_slack,
        threshold: -1e-6,
        detail: format!("{maps} mixture maps, 61 image points each; smallest half-space slack (must be >= threshold)"),
        budget: None,
    })
}

fn limits(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x09);
    // monotonicity in r
    let mut worst_drop: f64 = 0.0;
    for _ in 0..4 {
        let spec = random_spec(&mut rng, (2, 4), (1, 3), false)?;
        let e = unit(&mut rng, spec.m + 1);
        let q = rule(spec.n)?;
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=9 {
            let value = directional_bound(&spec.with_radius(k as f64 / 10.0)?, &e, q.clone())?.value;
            worst_drop = worst_drop.max(prev - value);
            prev = value;
        }
    }
    // shrink limit at a center where the first-order slope is below one
    let spec = ProblemSpec::new(3, 2, 1e-3, vec![0.5, 0.3], 0.6)?;
    let q = rule(3)?;
    let envelope = region_envelope(&spec, &DirectionScheme::Fibonacci { count: 64 }, q.clone())?;
    let center = spec.center();
    let shrink = envelope
        .halfspaces
        .iter()
        .map(|hs| hs.h - hs.e.iter().zip(&center).map(|(x, y)| x * y).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    // I strictly increasing along the solved path
    let path_spec = ProblemSpec::new(3, 2, 0.5, vec![0.3, 0.2], 0.4)?;
    let mut path_increasing = true;
    let mut prev = f64::NEG_INFINITY;
    for k in -4..=4 {
        let mu = 10f64.powf(k as f64 / 2.0);
        let (_, i) = lambda_on_path(&path_spec, mu, &q)?;
        path_increasing &= i > prev;
        prev = i;
    }
    let passed = worst_drop <= 0.0 && shrink < 1e-3 && path_increasing;
    Ok(Check {
        passed,
        measured: shrink,
        threshold: 1e-3,
        detail: format!(
            "r = 1e-3 shrink at (a,b) = (0.5,0.3,0.6) over 64 directions; largest decrease in r {worst_drop:.1e} (must be <= 0); I increasing in μ on 1e-2..1e2: {path_increasing}"
        ),
        budget: None,
    })
}

fn taylor(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0a);
    let mut min_gap = f64::INFINITY;
    for _ in 0..1000 {
        let m = rng.random_range(1..=8);
        let x = scaled(&unit(&mut rng, m), rng.random_range(0.0..=1.0));
        let y = scaled(&unit(&mut rng, m), rng.random_range(0.0..0.999));
        min_gap = min_gap.min(taylor_gap(&x, &y)?);
    }
    Ok(Check {
        passed: min_gap >= -1e-12,
        measured: min_gap,
        threshold: -1e-12,
        detail: "1000 pairs; smallest remainder (must be >= threshold)".into(),
        budget: None,
    })
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

fn harmonicity(seed: u64) -> Result<Check> {
    let spec = ProblemSpec::new(3, 2, 0.6, vec![0.3, -0.2], 0.4)?;
    let map = boundary_map_shared(&spec, rule(3)?)?;
    let biax = BiaxialRule::new(3, 128, 64)?;
    let s = 0.05;
    let harmonic = |x: &[f64]| eval_general(&map, x, &biax).map(|e| e.value);
    let calibration = |x: &[f64]| {
        let mut v = eval_general(&map, x, &biax)?.value;
        v[0] += x.iter().map(|t| t * t).sum::<f64>();
        Ok(v)
    };
    let mut worst: f64 = 0.0;
    let mut weakest_defect = f64::INFINITY;
    for (i, x) in sample_ball(3, 10, 0.8, seed ^ 0x0b).into_iter().enumerate() {
        worst = worst.max(mean_value_residual(harmonic, &x, s, 2048, seed.wrapping_add(i as u64))?);
        weakest_defect = weakest_defect.min(mean_value_residual(calibration, &x, s, 256, seed.wrapping_add(i as u64))?);
    }
    let detect = 0.45 * s * s;
    Ok(Check {
        passed: worst < 5e-3 && weakest_defect > detect,
        measured: worst,
        threshold: 5e-3,
        detail: format!("10 points, s = 0.05, 2048 probes; calibration map defect {weakest_defect:.3e} (must exceed {detect:.3e})"),
        budget: None,
    })
}
