//! The `krein` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 computation error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::KreinError;
use crate::field::{field_norm, Field, FieldSide};
use crate::geometry::{Problem, ProblemSpec, RadialGrid, RadialPotential, Side};
use crate::krein::{
    adjoint_pairing_residual, dtn_pair, full_resolvent_apply_with, gluing_check, green_identity_residual,
    CouplingOptions, GluingReport,
};
use crate::oracle::{fd_resolvent, FdOptions};
use crate::radial::{kappa, ode_residual};
use crate::scan::{scan, ScanOptions};
use crate::schur::{build_partitioned, discrete_krein_identity, Splitting};
use crate::sources::{random_boundary_data, SourceProfile};
use crate::special::{bessel_i, bessel_k, BesselEval};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "krein",
    version,
    about = "Kreĭn resolvent formula and DtN maps for radial Schrödinger operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// M_m(λ), τ_m(λ) and their sum for every mode and λ.
    Dtn,
    /// Applies the whole-space resolvent to the configured source.
    Resolve,
    /// Runs the identity suites and reports pass/fail as JSON.
    Verify,
    /// Locates eigenvalues as zeros of M_m + τ_m.
    Eigscan,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated modes, ranges as `a..b` (inclusive).
    #[arg(long, global = true, allow_hyphen_values = true)]
    modes: Option<String>,
    /// Spectral parameter `re,im`; repeatable, replaces the configured list.
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Vec<String>,
    /// Compare against the finite-difference oracle.
    #[arg(long, global = true)]
    oracle: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for automatic.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Test hook: flips the exterior normal in the resolvent coupling.
    #[arg(long, global = true)]
    break_sign: bool,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn compute(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_COMPUTE,
            message: message.into(),
        }
    }
}

fn at(m: i32, lambda: Complex64) -> impl Fn(KreinError) -> Failure {
    move |e| Failure::compute(format!("mode {m}, lambda {}{:+}i: {e}", lambda.re, lambda.im))
}

fn parse_modes(text: &str) -> Result<Vec<i32>, Failure> {
    let mut out = Vec::new();
    for token in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((a, b)) = token.split_once("..") {
            let a: i32 = a
                .trim()
                .parse()
                .map_err(|_| Failure::config(format!("bad mode range {token}")))?;
            let b: i32 = b
                .trim()
                .parse()
                .map_err(|_| Failure::config(format!("bad mode range {token}")))?;
            if a > b {
                return Err(Failure::config(format!("empty mode range {token}")));
            }
            out.extend(a..=b);
        } else {
            out.push(
                token
                    .parse()
                    .map_err(|_| Failure::config(format!("bad mode {token}")))?,
            );
        }
    }
    if out.is_empty() {
        return Err(Failure::config("empty mode list"));
    }
    Ok(out)
}

fn parse_lambda(text: &str) -> Result<[f64; 2], Failure> {
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| Failure::config(format!("lambda {text} is not of the form re,im")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Failure::config(format!("lambda {text} is not of the form re,im")))
    };
    Ok([parse(a)?, parse(b)?])
}

/// Config file plus command-line overrides, validated.
fn effective_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::config(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(m) = &common.modes {
        config.modes = Some(parse_modes(m)?);
    }
    if !common.lambda.is_empty() {
        config.lambda = common
            .lambda
            .iter()
            .map(|l| parse_lambda(l))
            .collect::<Result<_, _>>()?;
    }
    if common.oracle {
        config.oracle = true;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(threads) = common.threads {
        config.threads = threads;
    }
    if let Some(out) = &common.out {
        config.output = Some(out.clone());
    }
    config.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(config)
}

fn problem(config: &RunConfig) -> Result<Problem, Failure> {
    Problem::new(config.problem_spec()).map_err(|e| Failure::config(e.to_string()))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_header(command: &str, config: &RunConfig) -> String {
    format!(
        "# krein {command}\n# version {}\n# config_sha256 {}\n",
        env!("CARGO_PKG_VERSION"),
        config.hash()
    )
}

fn require_lambda(config: &RunConfig) -> Result<Vec<Complex64>, Failure> {
    let l = config.lambdas();
    if l.is_empty() {
        return Err(Failure::config(
            "no lambda given (use --lambda re,im or the lambda key)",
        ));
    }
    Ok(l)
}

/// What a command produces: the main document and an optional JSON side file.
struct Output {
    main: String,
    summary: Option<String>,
    code: i32,
}

fn cmd_dtn(config: &RunConfig) -> Result<Output, Failure> {
    let p = problem(config)?;
    let lambdas = require_lambda(config)?;
    let mut out = csv_header("dtn", config);
    out.push_str("m,re_lambda,im_lambda,re_M,im_M,re_tau,im_tau,re_d,im_d\n");
    for &lambda in &lambdas {
        for &m in &config.mode_list() {
            let (mi, tau) = dtn_pair(&p, m, lambda).map_err(at(m, lambda))?;
            let d = mi + tau;
            let cols = [lambda.re, lambda.im, mi.re, mi.im, tau.re, tau.im, d.re, d.im];
            let _ = writeln!(out, "{m},{}", cols.map(num).join(","));
        }
    }
    Ok(Output {
        main: out,
        summary: None,
        code: EXIT_OK,
    })
}

#[derive(Debug, Serialize)]
struct ResolveSummary {
    command: &'static str,
    version: &'static str,
    config_sha256: String,
    results: Vec<ResolveResult>,
}

#[derive(Debug, Serialize)]
struct ResolveResult {
    re_lambda: f64,
    im_lambda: f64,
    modes: Vec<i32>,
    max_residual: f64,
    max_gluing_dirichlet: f64,
    max_gluing_neumann: f64,
    gluing_pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution_rel_error: Option<f64>,
}

fn source_field(config: &RunConfig, p: &Problem, lambda: Complex64, modes: &[i32]) -> Result<Field, Failure> {
    let grid = p.grid();
    let full = match (config.fixed_source(), config.image_source()) {
        (Some(profile), _) => {
            let kept = SourceProfile {
                terms: profile.terms.into_iter().filter(|t| modes.contains(&t.mode)).collect(),
            };
            kept.to_field(grid, FieldSide::Whole)
        }
        (None, Some(image)) => image.source_field(p, lambda),
        (None, None) => unreachable!("every source kind is fixed or image"),
    }
    .map_err(|e| Failure::compute(e.to_string()))?;
    Ok(full.extend_by_zero(grid))
}

fn cmd_resolve(config: &RunConfig, options: CouplingOptions) -> Result<Output, Failure> {
    let p = problem(config)?;
    let grid = p.grid();
    let lambdas = require_lambda(config)?;
    let modes = match config.image_source() {
        Some(image) => vec![image.mode],
        None => config.mode_list(),
    };
    let mut csv = csv_header("resolve", config);
    csv.push_str("re_lambda,im_lambda,side,m,r,re_g,im_g\n");
    let mut results = Vec::new();
    for &lambda in &lambdas {
        let f = source_field(config, &p, lambda, &modes)?;
        let g = full_resolvent_apply_with(&p, lambda, &f, options)
            .map_err(|e| Failure::compute(format!("lambda {}{:+}i: {e}", lambda.re, lambda.im)))?;
        let mut max_residual = 0.0f64;
        for side in [Side::Interior, Side::Exterior] {
            for u in g.modes(side) {
                let fm = f.mode(side, u.mode).expect("source covers every mode");
                max_residual = max_residual.max(ode_residual(&p, u, fm, lambda, false).map_err(at(u.mode, lambda))?);
                for (r, v) in grid.side(side).nodes.iter().zip(&u.values) {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{}",
                        num(lambda.re),
                        num(lambda.im),
                        side.as_str(),
                        u.mode,
                        num(*r),
                        num(v.re),
                        num(v.im)
                    );
                }
            }
        }
        let gluing: GluingReport = gluing_check(&p, &g);
        let norm = field_norm(grid, &g).map_err(|e| Failure::compute(e.to_string()))?;
        let oracle_rel_error = if config.oracle {
            let fd_options = FdOptions {
                points_per_unit: config.fd_oracle.points_per_unit,
                levels: config.fd_oracle.levels,
            };
            let fixed = config.fixed_source();
            let image = config.image_source();
            let src = |side: Side, m: i32, r: f64| match (&fixed, &image) {
                (Some(profile), _) => profile.value(side, m, r),
                (None, Some(w)) => w.source(&p, side, lambda, r),
                (None, None) => Complex64::new(0.0, 0.0),
            };
            let reference =
                fd_resolvent(&p, lambda, &modes, &src, fd_options).map_err(|e| Failure::compute(e.to_string()))?;
            let diff = g.sub(&reference).map_err(|e| Failure::compute(e.to_string()))?;
            Some(field_norm(grid, &diff).map_err(|e| Failure::compute(e.to_string()))? / norm)
        } else {
            None
        };
        let solution_rel_error = match config.image_source() {
            Some(image) => {
                let w = image
                    .solution_field(grid)
                    .map_err(|e| Failure::compute(e.to_string()))?;
                let g_grid = strip_tails(grid, &g);
                let diff = g_grid.sub(&w).map_err(|e| Failure::compute(e.to_string()))?;
                Some(
                    field_norm(grid, &diff).map_err(|e| Failure::compute(e.to_string()))?
                        / field_norm(grid, &w).map_err(|e| Failure::compute(e.to_string()))?,
                )
            }
            None => None,
        };
        results.push(ResolveResult {
            re_lambda: lambda.re,
            im_lambda: lambda.im,
            modes: modes.clone(),
            max_residual,
            max_gluing_dirichlet: gluing.max_dirichlet(),
            max_gluing_neumann: gluing.max_neumann(),
            gluing_pass: gluing.pass,
            oracle_rel_error,
            solution_rel_error,
        });
    }
    let summary = ResolveSummary {
        command: "resolve",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config.hash(),
        results,
    };
    Ok(Output {
        main: csv,
        summary: Some(to_json(&summary)),
        code: EXIT_OK,
    })
}

/// Drops exterior tails so a field compares with grid-only samples.
fn strip_tails(grid: &RadialGrid, g: &Field) -> Field {
    let mut out = Field::new(g.side());
    for side in [Side::Interior, Side::Exterior] {
        for u in g.modes(side) {
            let mut u = u.clone();
            u.tail.clear();
            out.insert(grid, u).expect("mode taken from a field on the same grid");
        }
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct Suite {
    name: &'static str,
    pass: bool,
    cases: usize,
    max_residual: f64,
    tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    command: &'static str,
    version: &'static str,
    config_sha256: String,
    pass: bool,
    suites: Vec<Suite>,
}

fn suite(name: &'static str, tolerance: f64, run: impl FnOnce() -> Result<Vec<f64>, KreinError>) -> Suite {
    match run() {
        Ok(residuals) => {
            let max_residual = residuals.iter().copied().fold(0.0, f64::max);
            Suite {
                name,
                pass: residuals.iter().all(|r| *r <= tolerance),
                cases: residuals.len(),
                max_residual,
                tolerance,
                error: None,
            }
        }
        Err(e) => Suite {
            name,
            pass: false,
            cases: 0,
            max_residual: f64::NAN,
            tolerance,
            error: Some(e.to_string()),
        },
    }
}

/// Tolerances of the `verify` suites.
pub const GREEN_TOLERANCE: f64 = 1e-6;
pub const ADJOINT_TOLERANCE: f64 = 1e-8;
pub const WRONSKIAN_TOLERANCE: f64 = 1e-10;

fn cmd_verify(config: &RunConfig, options: CouplingOptions) -> Result<Output, Failure> {
    let p = problem(config)?;
    let grid = p.grid();
    let lambdas = if config.lambda.is_empty() {
        vec![Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.5)]
    } else {
        config.lambdas()
    };
    let r = config.interface_radius;
    let n = config.mode_cutoff;
    let pairs = config.verify.pairs as u64;
    let seed = config.seed;
    let mut suites = Vec::new();

    suites.push(suite("green_identity", GREEN_TOLERANCE, || {
        let mut out = Vec::new();
        for k in 0..pairs {
            for side in [Side::Interior, Side::Exterior] {
                let fs = match side {
                    Side::Interior => FieldSide::Interior,
                    Side::Exterior => FieldSide::Exterior,
                };
                let f = SourceProfile::random(seed.wrapping_mul(1_000).wrapping_add(2 * k), n, r).to_field(grid, fs)?;
                let g =
                    SourceProfile::random(seed.wrapping_mul(1_000).wrapping_add(2 * k + 1), n, r).to_field(grid, fs)?;
                let res = green_identity_residual(&p, &f, &g, side, true)?;
                out.push(res.norm() / (field_norm(grid, &f)? * field_norm(grid, &g)?));
            }
        }
        Ok(out)
    }));

    suites.push(suite("adjoint_pairing", ADJOINT_TOLERANCE, || {
        let mut out = Vec::new();
        for &lambda in &lambdas {
            for k in 0..pairs {
                let phi = random_boundary_data(seed.wrapping_mul(1_000).wrapping_add(k), r, n);
                for side in [Side::Interior, Side::Exterior] {
                    let fs = match side {
                        Side::Interior => FieldSide::Interior,
                        Side::Exterior => FieldSide::Exterior,
                    };
                    let f = SourceProfile::random(seed.wrapping_mul(1_000).wrapping_add(500 + k), n, r)
                        .to_field(grid, fs)?;
                    out.push(adjoint_pairing_residual(&p, side, lambda, &phi, &f, false)?);
                }
            }
        }
        Ok(out)
    }));

    suites.push(suite("gluing", crate::krein::GLUING_TOLERANCE, || {
        let mut out = Vec::new();
        for &lambda in &lambdas {
            let f = SourceProfile::random(seed, n, r).to_field(grid, FieldSide::Whole)?;
            let g = full_resolvent_apply_with(&p, lambda, &f, options)?;
            let report = gluing_check(&p, &g);
            out.push(report.max_dirichlet().max(report.max_neumann()) / report.scale.max(f64::MIN_POSITIVE));
        }
        Ok(out)
    }));

    suites.push(suite("wronskian", WRONSKIAN_TOLERANCE, || {
        let free = Problem::new(ProblemSpec::new(
            r,
            config.truncation_radius,
            n,
            config.grid_points,
            RadialPotential::zero(),
        ))?;
        let mut out = Vec::new();
        for &lambda in &lambdas {
            let z = kappa(lambda)? * r;
            for m in 0..=n as i32 {
                let nu = m as u32;
                let (mi, tau) = dtn_pair(&free, m, lambda)?;
                let closed = -1.0 / (r * bessel_i(nu, z)?.value * bessel_k(nu, z)?.value);
                out.push(((mi + tau) - closed).norm() / closed.norm());
                let eval = BesselEval::new(nu, z)?;
                out.push(eval.wronskian_residual() / eval.wronskian_scale());
            }
        }
        Ok(out)
    }));

    suites.push(suite("discrete_schur", crate::schur::IDENTITY_TOLERANCE, || {
        let potential = config.potential();
        let half_width = config.verify.discrete_box * r;
        let mut out = Vec::new();
        for &size in &config.verify.discrete_sizes {
            let h = 2.0 * half_width / (size + 1) as f64;
            let values: Vec<Complex64> = (0..size * size)
                .map(|k| {
                    let (i, j) = (k % size, k / size);
                    let x = -half_width + (i + 1) as f64 * h;
                    let y = -half_width + (j + 1) as f64 * h;
                    let rho = x.hypot(y);
                    if rho < r {
                        potential.value_at(rho)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            for splitting in [Splitting::Half, Splitting::AllInterior] {
                let op = build_partitioned(size, half_width, r, &values, splitting)?;
                for &lambda in &lambdas {
                    let report = discrete_krein_identity(&op, lambda)?;
                    out.push(
                        report
                            .compressed_residual
                            .max(report.full_residual)
                            .max(report.sum_residual),
                    );
                }
            }
        }
        Ok(out)
    }));

    let pass = suites.iter().all(|s| s.pass);
    let report = VerifyReport {
        command: "verify",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config.hash(),
        pass,
        suites,
    };
    Ok(Output {
        main: to_json(&report),
        summary: None,
        code: if pass { EXIT_OK } else { EXIT_VERIFY },
    })
}

fn cmd_eigscan(config: &RunConfig) -> Result<Output, Failure> {
    let p = problem(config)?;
    let region = config.scan.region();
    region.validate().map_err(|e| Failure::config(e.to_string()))?;
    let report = scan(
        &p,
        &region,
        &config.mode_list(),
        ScanOptions {
            threads: config.threads,
        },
    )
    .map_err(|e| Failure::compute(e.to_string()))?;
    let mut out = csv_header("eigscan", config);
    if report.clipped {
        let _ = writeln!(
            out,
            "# clipped: region intersects the band |Im λ| < {}, Re λ > -{} around [0, inf) and was reduced to {} piece(s)",
            region.cut_band,
            region.cut_band,
            region.pieces().len()
        );
    }
    for u in &report.unresolved {
        let _ = writeln!(
            out,
            "# unresolved: mode {} cell [{}, {}] x [{}, {}]: {}",
            u.mode, u.cell.re_min, u.cell.re_max, u.cell.im_min, u.cell.im_max, u.reason
        );
    }
    out.push_str("mode,re_lambda,im_lambda,abs_d,winding,newton_iters,converged\n");
    for z in &report.zeros {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            z.mode,
            num(z.lambda.re),
            num(z.lambda.im),
            num(z.abs_d),
            z.winding,
            z.newton_iterations,
            z.converged
        );
    }
    Ok(Output {
        main: out,
        summary: None,
        code: EXIT_OK,
    })
}

fn execute(cli: Cli) -> Result<Output, Failure> {
    let config = effective_config(&cli.common)?;
    let options = CouplingOptions {
        flip_exterior_normal: cli.common.break_sign,
    };
    match cli.command {
        Command::Dtn => cmd_dtn(&config),
        Command::Resolve => cmd_resolve(&config, options),
        Command::Verify => cmd_verify(&config, options),
        Command::Eigscan => cmd_eigscan(&config),
    }
}

fn write_output(path: &Option<PathBuf>, output: &Output) -> Result<(), Failure> {
    match path {
        Some(path) => {
            std::fs::write(path, &output.main)
                .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
            if let Some(summary) = &output.summary {
                let side = path.with_extension("json");
                std::fs::write(&side, summary)
                    .map_err(|e| Failure::config(format!("cannot write {}: {e}", side.display())))?;
            }
        }
        None => {
            print!("{}", output.main);
            if let Some(summary) = &output.summary {
                eprint!("{summary}");
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = cli.common.out.clone();
    match execute(cli).and_then(|output| write_output(&out, &output).map(|_| output.code)) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_lists() {
        assert_eq!(parse_modes("-2,2").unwrap(), vec![-2, 2]);
        assert_eq!(parse_modes("-1..1, 4").unwrap(), vec![-1, 0, 1, 4]);
        assert!(parse_modes("a").is_err());
        assert!(parse_modes("3..1").is_err());
        assert!(parse_modes("").is_err());
    }

    #[test]
    fn lambda_pairs() {
        assert_eq!(parse_lambda("-2,0.5").unwrap(), [-2.0, 0.5]);
        assert!(parse_lambda("-2").is_err());
        assert!(parse_lambda("x,1").is_err());
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        let s = num(-1.876_015_364_156_935_3);
        assert_eq!(s, "-1.8760153641569353e0");
        assert_eq!(s.parse::<f64>().unwrap(), -1.876_015_364_156_935_3);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["krein", "nonsense"]), EXIT_CONFIG);
        assert_eq!(run(["krein", "dtn", "--lambda", "1"]), EXIT_CONFIG);
        assert_eq!(run(["krein", "dtn"]), EXIT_CONFIG);
    }

    #[test]
    fn cut_exits_three() {
        assert_eq!(run(["krein", "dtn", "--lambda", "4,0", "--modes", "0"]), EXIT_COMPUTE);
    }
}
