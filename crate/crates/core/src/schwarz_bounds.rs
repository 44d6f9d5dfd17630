//! Sharp directional bounds and the support-function envelope of the image of
//! `B_r^n` under harmonic maps with center value `(a, b)`.
//!
//! For a unit `e ∈ R^{m+1}` let `Q_e` be the reflection with `e Q_e = e_0`.
//! Every admissible `F` satisfies `⟨F(rω), e⟩ ≤ h(e)` where
//! `h(e) = ⟨F_{(a,b)Q_e, r}(rN), e_0⟩`, with equality attained by the extremal
//! map of the rotated center. The image of the closed ball `|x| ≤ r` lies in
//! the intersection of the half-spaces `⟨y, e⟩ ≤ h(e)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Result, SchwarzError};
use crate::extremal_mapping::{boundary_map_shared, constraint_residuals, eval_on_axis, BoundaryMap};
use crate::extremal_solver::ProblemSpec;
use crate::linalg_kernels::rotation_to_pole;
use crate::sphere_quadrature::{axial_poisson_kernel, kernel_breakpoints, sample_sphere, zonal_integrate, QuadratureRule};

/// A sharp bound in one direction together with its extremal witness.
#[derive(Clone, Debug)]
pub struct BoundResult {
    pub spec: ProblemSpec,
    /// Unit direction `e ∈ R^{m+1}`.
    pub direction: Vec<f64>,
    /// `h(e)`.
    pub value: f64,
    /// Extremal map of the rotated problem with center `(a, b) Q_e`.
    pub witness: BoundaryMap,
    /// Constraint residuals `(‖∫u - a'‖, |∫v - b'|)` of the witness.
    pub residuals: (f64, f64),
}

/// `h(e_0) = ⟨F_{a,b,r}(rN), e_0⟩`.
pub fn axis_bound(spec: &ProblemSpec, rule: Arc<QuadratureRule>) -> Result<BoundResult> {
    let witness = boundary_map_shared(spec, rule.clone())?;
    let value = eval_on_axis(&witness, spec.r)?.value[0];
    let residuals = constraint_residuals(&witness, &rule)?;
    let mut direction = vec![0.0; spec.m + 1];
    direction[0] = 1.0;
    Ok(BoundResult {
        spec: spec.clone(),
        direction,
        value,
        witness,
        residuals,
    })
}

/// `h(e)` for a unit direction `e`, via the rotated center `(a, b) Q_e`.
pub fn directional_bound(spec: &ProblemSpec, e: &[f64], rule: Arc<QuadratureRule>) -> Result<BoundResult> {
    if e.len() != spec.m + 1 {
        return Err(SchwarzError::domain(format!(
            "direction must have {} components, got {}",
            spec.m + 1,
            e.len()
        )));
    }
    let q = rotation_to_pole(e)?;
    let mut rotated = q.left_mul(&spec.center());
    let b = rotated.pop().unwrap_or(0.0);
    // rounding can push a boundary-adjacent center outside the ball
    let rotated_spec = spec.with_center(rotated, b)?;
    let mut result = axis_bound(&rotated_spec, rule)?;
    result.spec = spec.clone();
    result.direction = e.to_vec();
    Ok(result)
}

/// `U(rN)` for the boundary function equal to `1` on the northern and `-1` on
/// the southern hemisphere: the bound when `F(0) = 0`.
pub fn classical_bound(n: usize, r: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(SchwarzError::domain("r must lie in (0,1)"));
    }
    if rule.dimension() != n {
        return Err(SchwarzError::domain("quadrature rule dimension does not match n"));
    }
    let mut breakpoints = kernel_breakpoints(r);
    breakpoints.push(0.0);
    zonal_integrate(rule, |t| axial_poisson_kernel(r, t, n) * t.signum(), &breakpoints)
}

/// How the envelope directions were produced.
#[derive(Clone, Debug, PartialEq)]
pub enum DirectionScheme {
    /// Caller-supplied unit directions.
    Explicit(Vec<Vec<f64>>),
    /// `count` equally spaced angles; `m + 1 = 2` only.
    Angular { count: usize },
    /// Fibonacci lattice; `m + 1 = 3` only.
    Fibonacci { count: usize },
    /// Seeded uniform samples on the unit sphere.
    Random { count: usize, seed: u64 },
}

impl DirectionScheme {
    /// Default scheme for a target dimension: angular grid in the plane,
    /// Fibonacci lattice in space, seeded sampling otherwise.
    pub fn auto(dim: usize, count: usize, seed: u64) -> Self {
        match dim {
            2 => DirectionScheme::Angular { count },
            3 => DirectionScheme::Fibonacci { count },
            _ => DirectionScheme::Random { count, seed },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DirectionScheme::Explicit(_) => "explicit",
            DirectionScheme::Angular { .. } => "angular",
            DirectionScheme::Fibonacci { .. } => "fibonacci",
            DirectionScheme::Random { .. } => "random",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            DirectionScheme::Random { seed, .. } => *seed,
            _ => 0,
        }
    }

    /// Unit directions in `R^dim`, in a fixed order.
    pub fn directions(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        let dirs = match self {
            DirectionScheme::Explicit(list) => list.clone(),
            DirectionScheme::Angular { count } => {
                if dim != 2 {
                    return Err(SchwarzError::domain("angular directions need m + 1 = 2"));
                }
                (0..*count)
                    .map(|k| {
                        let phi = 2.0 * PI * k as f64 / *count as f64;
                        vec![phi.cos(), phi.sin()]
                    })
                    .collect()
            }
            DirectionScheme::Fibonacci { count } => {
                if dim != 3 {
                    return Err(SchwarzError::domain("Fibonacci directions need m + 1 = 3"));
                }
                let golden = PI * (3.0 - 5f64.sqrt());
                (0..*count)
                    .map(|i| {
                        let z = 1.0 - (2 * i + 1) as f64 / *count as f64;
                        let rho = (1.0 - z * z).max(0.0).sqrt();
                        let phi = golden * i as f64;
                        normalized(vec![rho * phi.cos(), rho * phi.sin(), z])
                    })
                    .collect()
            }
            DirectionScheme::Random { count, seed } => {
                if *count == 0 {
                    Vec::new()
                } else {
                    sample_sphere(dim, *count, *seed)?
                }
            }
        };
        if dirs.is_empty() {
            return Err(SchwarzError::domain("direction set is empty"));
        }
        for e in &dirs {
            if e.len() != dim {
                return Err(SchwarzError::domain(format!("direction {e:?} does not lie in R^{dim}")));
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() >= 1e-12 {
                return Err(SchwarzError::domain(format!("direction {e:?} is not a unit vector")));
            }
        }
        Ok(dirs)
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// One supporting half-space `⟨y, e⟩ ≤ h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub e: Vec<f64>,
    pub h: f64,
}

/// Sampled support function of the image region.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionEnvelope {
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub a: Vec<f64>,
    pub b: f64,
    pub halfspaces: Vec<Halfspace>,
    pub scheme: String,
    pub seed: u64,
    pub quadrature_order: usize,
}

/// `h(e)` for every direction of the scheme, in scheme order.
///
/// Directions are evaluated in parallel; each is an independent deterministic
/// computation, so the result does not depend on scheduling.
pub fn region_envelope(
    spec: &ProblemSpec,
    scheme: &DirectionScheme,
    rule: Arc<QuadratureRule>,
) -> Result<RegionEnvelope> {
    let directions = scheme.directions(spec.m + 1)?;
    let values: Vec<f64> = directions
        .par_iter()
        .map(|e| directional_bound(spec, e, rule.clone()).map(|res| res.value))
        .collect::<Result<_>>()?;
    Ok(RegionEnvelope {
        n: spec.n,
        m: spec.m,
        r: spec.r,
        a: spec.a.clone(),
        b: spec.b,
        halfspaces: directions
            .into_iter()
            .zip(values)
            .map(|(e, h)| Halfspace { e, h })
            .collect(),
        scheme: scheme.name().to_string(),
        seed: scheme.seed(),
        quadrature_order: rule.order(),
    })
}

impl RegionEnvelope {
    /// Smallest `h - ⟨y, e⟩` over all half-spaces; nonnegative iff `y` lies in
    /// the sampled envelope.
    pub fn slack(&self, y: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .map(|hs| hs.h - hs.e.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// JSON document with a fixed field order and 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push('{');
        let _ = write!(out, "\"n\":{},\"m\":{},\"r\":{},", self.n, self.m, format_float(self.r));
        let _ = write!(out, "\"a\":{},\"b\":{},", format_list(&self.a), format_float(self.b));
        out.push_str("\"halfspaces\":[");
        for (i, hs) in self.halfspaces.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{{\"e\":{},\"h\":{}}}", format_list(&hs.e), format_float(hs.h));
        }
        out.push_str("],");
        let _ = write!(
            out,
            "\"scheme\":{},\"seed\":{},\"quadrature_order\":{}",
            Value::String(self.scheme.clone()),
            self.seed,
            self.quadrature_order
        );
        out.push_str("}\n");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| SchwarzError::domain(format!("invalid envelope JSON: {e}")))?;
        let bad = |field: &str| SchwarzError::domain(format!("envelope JSON: missing or invalid `{field}`"));
        let float_list = |v: &Value, field: &str| -> Result<Vec<f64>> {
            v.as_array()
                .ok_or_else(|| bad(field))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| bad(field)))
                .collect()
        };
        let halfspaces = doc["halfspaces"]
            .as_array()
            .ok_or_else(|| bad("halfspaces"))?
            .iter()
            .map(|hs| {
                Ok(Halfspace {
                    e: float_list(&hs["e"], "e")?,
                    h: hs["h"].as_f64().ok_or_else(|| bad("h"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n: doc["n"].as_u64().ok_or_else(|| bad("n"))? as usize,
            m: doc["m"].as_u64().ok_or_else(|| bad("m"))? as usize,
            r: doc["r"].as_f64().ok_or_else(|| bad("r"))?,
            a: float_list(&doc["a"], "a")?,
            b: doc["b"].as_f64().ok_or_else(|| bad("b"))?,
            halfspaces,
            scheme: doc["scheme"].as_str().ok_or_else(|| bad("scheme"))?.to_string(),
            seed: doc["seed"].as_u64().ok_or_else(|| bad("seed"))?,
            quadrature_order: doc["quadrature_order"].as_u64().ok_or_else(|| bad("quadrature_order"))? as usize,
        })
    }
}

/// Scientific notation with 17 significant digits; valid as a JSON number and
/// independent of locale.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        // normalize -0
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

fn format_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format_float(*v)).collect();
    format!("[{}]", items.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rule(n: usize) -> Arc<QuadratureRule> {
        Arc::new(QuadratureRule::new(n, 256).unwrap())
    }

    #[test]
    fn heinz_value_at_half() {
        let spec = ProblemSpec::new(2, 1, 0.5, vec![0.0], 0.0).unwrap();
        let res = axis_bound(&spec, rule(2)).unwrap();
        let expected = 4.0 / PI * 0.5f64.atan();
        assert_abs_diff_eq!(res.value, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.59033, epsilon = 1e-5);
        assert_abs_diff_eq!(classical_bound(2, 0.5, &rule(2)).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn small_radius_approaches_center() {
        let spec = ProblemSpec::new(3, 2, 1e-3, vec![0.3, -0.1], 0.2).unwrap();
        let res = axis_bound(&spec, rule(3)).unwrap();
        // first order in r: the slope at the center is about 1.3 here
        assert!((res.value - 0.3).abs() < 2e-3);
        let tight = ProblemSpec::new(3, 2, 1e-3, vec![0.6, 0.0], 0.7).unwrap();
        assert!((axis_bound(&tight, rule(3)).unwrap().value - 0.6).abs() < 1e-3);
        assert!(classical_bound(3, 1e-3, &rule(3)).unwrap() < 5e-3);
    }

    #[test]
    fn classical_bound_near_one() {
        let q = rule(3);
        let v = classical_bound(3, 0.999, &q).unwrap();
        assert!(v > 0.97 && v < 1.0);
        // closed form on S²: U(rN) = ((1-r²)/r)(1/(1-r) - 2/√(1+r²) + 1/(1+r)) / 2
        let r: f64 = 0.999;
        let s = (1.0 + r * r).sqrt();
        let expected = 0.5 * (1.0 - r * r) / r * (1.0 / (1.0 - r) - 2.0 / s + 1.0 / (1.0 + r));
        assert_abs_diff_eq!(v, expected, epsilon = 1e-8);
    }

    #[test]
    fn first_axis_direction_equals_axis_bound() {
        let spec = ProblemSpec::new(3, 2, 0.4, vec![0.2, 0.3], 0.1).unwrap();
        let q = rule(3);
        let a = axis_bound(&spec, q.clone()).unwrap().value;
        let d = directional_bound(&spec, &[1.0, 0.0, 0.0], q).unwrap().value;
        assert_eq!(a, d);
    }

    #[test]
    fn reversed_direction_dominates_reflected_center() {
        let spec = ProblemSpec::new(3, 2, 0.4, vec![0.3, 0.0], 0.4).unwrap();
        let res = directional_bound(&spec, &[-1.0, 0.0, 0.0], rule(3)).unwrap();
        assert!(res.value >= -0.3);
    }

    #[test]
    fn rejects_non_unit_direction() {
        let spec = ProblemSpec::new(3, 1, 0.4, vec![0.3], 0.4).unwrap();
        assert!(directional_bound(&spec, &[1.0, 0.1], rule(3)).is_err());
        assert!(directional_bound(&spec, &[1.0, 0.0, 0.0], rule(3)).is_err());
    }

    #[test]
    fn direction_schemes() {
        let dirs = DirectionScheme::Angular { count: 4 }.directions(2).unwrap();
        assert_abs_diff_eq!(dirs[1][1], 1.0, epsilon = 1e-15);
        let fib = DirectionScheme::Fibonacci { count: 50 }.directions(3).unwrap();
        assert_eq!(fib.len(), 50);
        let rnd = DirectionScheme::Random { count: 5, seed: 3 }.directions(4).unwrap();
        assert_eq!(rnd, DirectionScheme::Random { count: 5, seed: 3 }.directions(4).unwrap());
        assert!(DirectionScheme::Angular { count: 0 }.directions(2).is_err());
        assert!(DirectionScheme::Explicit(vec![]).directions(2).is_err());
        assert!(DirectionScheme::Explicit(vec![vec![1.0, 1.0]]).directions(2).is_err());
        assert_eq!(DirectionScheme::auto(5, 3, 1).name(), "random");
    }

    #[test]
    fn envelope_json_round_trip() {
        let spec = ProblemSpec::new(2, 1, 0.3, vec![0.1], -0.2).unwrap();
        let env = region_envelope(&spec, &DirectionScheme::Angular { count: 6 }, rule(2)).unwrap();
        let text = env.to_json();
        assert_eq!(RegionEnvelope::from_json(&text).unwrap(), env);
        let keys: Vec<usize> = ["\"n\"", "\"m\"", "\"r\"", "\"a\"", "\"b\"", "\"halfspaces\"", "\"scheme\"", "\"seed\"", "\"quadrature_order\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(env.slack(&[0.1, -0.2]) >= -1e-10);
    }

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-0.0), "0.0000000000000000e0");
        let x = 0.590_333_488_360_102_6_f64;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }
}
