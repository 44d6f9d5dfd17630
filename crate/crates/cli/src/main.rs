//! `schwarz`: sharp bounds, envelopes and extremal data for harmonic maps
//! between unit balls.
//!
//! Exit status: 0 on success, 1 when `verify` finds a failing criterion,
//! 2 for invalid input and 3 when a solver or oracle does not converge.

mod output;

use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use schwarz_core::extremal_mapping::{boundary_map_with_tol, constraint_residuals, ZonalBoundaryData};
use schwarz_core::extremal_solver::ProblemSpec;
use schwarz_core::schwarz_bounds::{classical_bound, directional_bound, format_float, region_envelope, DirectionScheme};
use schwarz_core::sphere_quadrature::{QuadratureRule, DEFAULT_ORDER};
use schwarz_core::suite::{run_suite, SuiteConfig, CRITERIA};
use schwarz_core::SchwarzError;

use output::{csv_row, json_list, json_string, write_output};

#[derive(Parser)]
#[command(name = "schwarz", version, about = "Sharp Schwarz-type bounds for harmonic maps between unit balls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sharp bound h(e) = sup ⟨F(x), e⟩ over |x| ≤ r
    Bound(BoundArgs),
    /// Support-function envelope of the image of the closed r-ball
    Region(RegionArgs),
    /// Multipliers and tabulated extremal boundary profiles
    Extremal(ExtremalArgs),
    /// Bound for F(0) = 0: the Poisson integral of the hemisphere sign function
    Classical(ClassicalArgs),
    /// Run the acceptance suite or one of its criteria
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Domain dimension
    #[arg(long)]
    n: usize,
    /// Number of u components; defaults to the length of --a
    #[arg(long)]
    m: Option<usize>,
    /// Radius in (0, 1)
    #[arg(long)]
    r: f64,
    /// u part of F(0), comma separated
    #[arg(long, allow_hyphen_values = true)]
    a: String,
    /// v part of F(0)
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    /// Quadrature order
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Unit direction in R^{m+1}, comma separated; defaults to e_0
    #[arg(long, allow_hyphen_values = true)]
    e: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scheme {
    Auto,
    Angular,
    Fibonacci,
    Random,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Number of sampled directions
    #[arg(long, default_value_t = 64)]
    directions: usize,
    #[arg(long, value_enum, default_value_t = Scheme::Auto)]
    scheme: Scheme,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit unit direction (repeatable); overrides the sampling scheme
    #[arg(long, allow_hyphen_values = true)]
    e: Vec<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ExtremalArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Moment-residual tolerance of the solver
    #[arg(long)]
    tol: Option<f64>,
    /// Number of tabulated latitudes t in [-1, 1]
    #[arg(long, default_value_t = 101)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct ClassicalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// `full` or a single criterion name
    #[arg(long, default_value = "full")]
    suite: String,
    /// Latitude count of the discretized oracle
    #[arg(long, default_value_t = 2048)]
    nodes: usize,
    #[arg(long)]
    seed: Option<u64>,
}

/// A failure mapped to an exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<SchwarzError> for Failure {
    fn from(err: SchwarzError) -> Self {
        match err {
            SchwarzError::Domain(msg) | SchwarzError::Precondition(msg) | SchwarzError::Branch(msg) => {
                Failure { code: 2, message: msg }
            }
            other => Failure {
                code: 3,
                message: other.to_string(),
            },
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bound(args) => cmd_bound(args),
        Command::Region(args) => cmd_region(args),
        Command::Extremal(args) => cmd_extremal(args),
        Command::Classical(args) => cmd_classical(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| invalid(format!("{what}: `{item}` is not a finite number")))
        })
        .collect()
}

impl ProblemArgs {
    fn spec(&self) -> Result<ProblemSpec, Failure> {
        let a = parse_list(&self.a, "--a")?;
        let m = self.m.unwrap_or(a.len());
        if a.len() != m {
            return Err(invalid(format!("--a has {} components but --m is {m}", a.len())));
        }
        Ok(ProblemSpec::new(self.n, m, self.r, a, self.b)?)
    }

    fn rule(&self, spec: &ProblemSpec) -> Result<Arc<QuadratureRule>, Failure> {
        Ok(Arc::new(QuadratureRule::new(spec.n, self.order)?))
    }
}

fn cmd_bound(args: BoundArgs) -> Result<u8, Failure> {
    let spec = args.problem.spec()?;
    let e = match &args.e {
        Some(text) => parse_list(text, "--e")?,
        None => {
            let mut e0 = vec![0.0; spec.m + 1];
            e0[0] = 1.0;
            e0
        }
    };
    let rule = args.problem.rule(&spec)?;
    let res = directional_bound(&spec, &e, rule)?;
    let sol = res.witness.solution();
    let doc = match args.output.format {
        Format::Json => {
            let mu = sol.mu.map_or("null".to_string(), format_float);
            format!(
                "{{\"n\":{},\"m\":{},\"r\":{},\"a\":{},\"b\":{},\"e\":{},\"value\":{},\"residuals\":{},\"branch\":{},\"lambda\":{},\"mu\":{},\"iterations\":{},\"warnings\":[{}]}}\n",
                spec.n,
                spec.m,
                format_float(spec.r),
                json_list(&spec.a),
                format_float(spec.b),
                json_list(&res.direction),
                format_float(res.value),
                json_list(&[res.residuals.0, res.residuals.1]),
                json_string(sol.branch.as_str()),
                json_list(&sol.lambda),
                mu,
                sol.iterations,
                sol.warnings.iter().map(|w| json_string(w)).collect::<Vec<_>>().join(",")
            )
        }
        Format::Csv => {
            let mut header = vec!["n".to_string(), "m".to_string(), "r".to_string()];
            header.extend((1..=spec.m).map(|j| format!("a{j}")));
            header.push("b".into());
            header.extend((1..=spec.m + 1).map(|j| format!("e{j}")));
            header.extend(["value", "residual_a", "residual_b", "iterations"].map(String::from));
            let mut row = vec![spec.n.to_string(), spec.m.to_string(), format_float(spec.r)];
            row.extend(spec.a.iter().map(|x| format_float(*x)));
            row.push(format_float(spec.b));
            row.extend(res.direction.iter().map(|x| format_float(*x)));
            row.extend([res.value, res.residuals.0, res.residuals.1].map(format_float));
            row.push(sol.iterations.to_string());
            format!("{}{}", csv_row(&header), csv_row(&row))
        }
    };
    write_output(args.output.out.as_deref(), &doc)?;
    Ok(0)
}

fn cmd_region(args: RegionArgs) -> Result<u8, Failure> {
    let spec = args.problem.spec()?;
    let dim = spec.m + 1;
    let scheme = if !args.e.is_empty() {
        DirectionScheme::Explicit(args.e.iter().map(|t| parse_list(t, "--e")).collect::<Result<_, _>>()?)
    } else {
        match args.scheme {
            Scheme::Auto => DirectionScheme::auto(dim, args.directions, args.seed),
            Scheme::Angular => DirectionScheme::Angular { count: args.directions },
            Scheme::Fibonacci => DirectionScheme::Fibonacci { count: args.directions },
            Scheme::Random => DirectionScheme::Random {
                count: args.directions,
                seed: args.seed,
            },
        }
    };
    let rule = args.problem.rule(&spec)?;
    let envelope = region_envelope(&spec, &scheme, rule)?;
    let doc = match args.output.format {
        Format::Json => envelope.to_json(),
        Format::Csv => {
            let mut header: Vec<String> = (1..=dim).map(|j| format!("e{j}")).collect();
            header.push("h".into());
            let mut doc = csv_row(&header);
            for hs in &envelope.halfspaces {
                let mut row: Vec<String> = hs.e.iter().map(|x| format_float(*x)).collect();
                row.push(format_float(hs.h));
                doc.push_str(&csv_row(&row));
            }
            doc
        }
    };
    write_output(args.output.out.as_deref(), &doc)?;
    Ok(0)
}

fn cmd_extremal(args: ExtremalArgs) -> Result<u8, Failure> {
    let spec = args.problem.spec()?;
    if args.samples < 2 {
        return Err(invalid("--samples must be at least 2"));
    }
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(invalid("--tol must lie in (0,1)"));
        }
    }
    let rule = args.problem.rule(&spec)?;
    let map = boundary_map_with_tol(&spec, rule.clone(), args.tol)?;
    let (ra, rb) = constraint_residuals(&map, &rule)?;
    let sol = map.solution();
    let m = spec.m;
    let samples: Vec<(f64, Vec<f64>)> = (0..args.samples)
        .map(|k| {
            // descending from the pole, matching the node order of the rules
            let t = 1.0 - 2.0 * k as f64 / (args.samples - 1) as f64;
            (t, map.value(t))
        })
        .collect();
    let doc = match args.format {
        Format::Csv => {
            let mut header = vec!["t".to_string()];
            header.extend((1..=m).map(|j| format!("u{j}")));
            header.push("v".into());
            let mut doc = csv_row(&header);
            for (t, value) in &samples {
                let mut row = vec![format_float(*t)];
                row.extend(value.iter().map(|x| format_float(*x)));
                doc.push_str(&csv_row(&row));
            }
            eprintln!(
                "branch {} lambda {} mu {} residual_a {} residual_b {} iterations {}",
                sol.branch.as_str(),
                sol.lambda.iter().map(|x| format_float(*x)).collect::<Vec<_>>().join(","),
                sol.mu.map_or("none".to_string(), format_float),
                format_float(ra),
                format_float(rb),
                sol.iterations
            );
            doc
        }
        Format::Json => {
            let rows: Vec<String> = samples
                .iter()
                .map(|(t, value)| {
                    format!(
                        "{{\"t\":{},\"u\":{},\"v\":{}}}",
                        format_float(*t),
                        json_list(&value[..m]),
                        format_float(value[m])
                    )
                })
                .collect();
            format!(
                "{{\"n\":{},\"m\":{},\"r\":{},\"a\":{},\"b\":{},\"branch\":{},\"lambda\":{},\"mu\":{},\"jump_point\":{},\"residuals\":{},\"iterations\":{},\"samples\":[{}]}}\n",
                spec.n,
                m,
                format_float(spec.r),
                json_list(&spec.a),
                format_float(spec.b),
                json_string(sol.branch.as_str()),
                json_list(&sol.lambda),
                sol.mu.map_or("null".to_string(), format_float),
                sol.jump_point.map_or("null".to_string(), format_float),
                json_list(&[ra, rb]),
                sol.iterations,
                rows.join(",")
            )
        }
    };
    write_output(args.out.as_deref(), &doc)?;
    Ok(0)
}

fn cmd_classical(args: ClassicalArgs) -> Result<u8, Failure> {
    if !(args.r > 0.0 && args.r < 1.0) {
        return Err(invalid("r must lie in (0,1)"));
    }
    let rule = QuadratureRule::new(args.n, args.order)?;
    let value = classical_bound(args.n, args.r, &rule)?;
    let doc = match args.output.format {
        Format::Json => format!(
            "{{\"n\":{},\"r\":{},\"value\":{}}}\n",
            args.n,
            format_float(args.r),
            format_float(value)
        ),
        Format::Csv => format!(
            "{}{}",
            csv_row(&["n", "r", "value"]),
            csv_row(&[args.n.to_string(), format_float(args.r), format_float(value)])
        ),
    };
    write_output(args.output.out.as_deref(), &doc)?;
    Ok(0)
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, Failure> {
    if args.nodes < 64 {
        return Err(invalid("--nodes must be at least 64"));
    }
    let mut config = SuiteConfig {
        oracle_nodes: args.nodes,
        ..SuiteConfig::default()
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let reports = run_suite(&args.suite, &config).ok_or_else(|| {
        invalid(format!(
            "unknown suite `{}`; expected `full` or one of {}",
            args.suite,
            CRITERIA.join(", ")
        ))
    })?;
    for report in &reports {
        println!("{report}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", reports.len() - failed, reports.len());
    Ok(if failed == 0 { 0 } else { 1 })
}
