//! Command-line front end: argument parsing, report assembly and exit codes.
//!
//! Exit codes: 0 when every check passes, 1 when a verification fails, 2 on
//! a usage or configuration error.

use std::fmt;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use simplicial_gap::anstreicher::{verify_anstreicher_capped, AnstreicherReport};
use simplicial_gap::certificate::{
    assemble, closed_form_spectrum, coefficient_identities, coeffs_general, objective_closed_form,
    objective_povh_rendl, verify_povh_rendl_capped, FeasibilityReport, FeasibilityTolerances,
    VerifyMode,
};
use simplicial_gap::circulant::{identity_suite, IdentityReport};
use simplicial_gap::eigen::DEFAULT_MAX_DIM;
use simplicial_gap::instance::{tsp_optimum, SimplicialInstance, TspMethod, DP_MAX_VERTICES};
use simplicial_gap::reduced::{build_reduction, gap_table, gap_table_csv, objective_reduced};
use simplicial_gap::sdp::{
    encode_reduced, nonmonotonicity_check_with, solve, NonMonotonicityReport, SolveOptions,
};
use simplicial_gap::sigfig::{f64_str, opt_f64_str};
use simplicial_gap::subtour::{solve_subtour, LpEdgeSolution, LpStatus};
use simplicial_gap::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Environment variable overriding the dense dimension cap.
pub const MAX_DENSE_ENV: &str = "SIMPLICIAL_GAP_MAX_DENSE";

const LP_TOL: f64 = 1e-6;
const TINY_TOL: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(
    name = "simplicial-gap",
    version,
    about = "Certificates, gap tables and baselines for simplicial TSP instances"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Also verify with the materialised matrix and dense eigensolver.
    #[arg(long, global = true)]
    pub dense: bool,
    /// Write the report here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Equality residual tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_eq: f64,
    /// Tolerance on the minimum eigenvalue.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_psd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify the certificate for both relaxations.
    Certify {
        #[arg(long)]
        g: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
    },
    /// Gap lower bounds on the one-extra-vertex instances with `g = 2z`.
    Gap {
        #[arg(long)]
        z: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
    },
    /// Exact TSP value, analytic value and subtour LP value.
    Baseline {
        #[arg(long)]
        g: usize,
        #[arg(long)]
        per_group: usize,
    },
    /// Solve a tiny reduced SDP numerically.
    SolveTiny {
        /// Vertices per group before the extra vertex is added.
        #[arg(long, default_value_t = 1)]
        per_group: usize,
        /// Certificate size compared against in the three-vertex case.
        #[arg(long, default_value_t = 16)]
        n: usize,
    },
    /// Evaluate the trigonometric and coefficient identity suites.
    Identities {
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
        g: Vec<usize>,
        /// Defaults to every even n from 4 to 200.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Failure(_) => EXIT_FAILED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Failure(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } => CliError::Failure(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn failure(e: impl fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// A rendered report and the exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
}

impl Outcome {
    fn new(pass: bool, body: String) -> Self {
        Outcome {
            code: if pass { EXIT_OK } else { EXIT_FAILED },
            body,
        }
    }
}

/// Dense dimension cap, from the environment when set.
pub fn max_dense() -> Result<usize, CliError> {
    match std::env::var(MAX_DENSE_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .ok()
            .filter(|&cap: &usize| cap > 0)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "{MAX_DENSE_ENV} must be a positive integer, got {v:?}"
                ))
            }),
        Err(_) => Ok(DEFAULT_MAX_DIM),
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let c = &cli.common;
    if !(c.tol_eq > 0.0) || !(c.tol_psd >= 0.0) {
        return Err(CliError::Config(
            "--tol-eq must be positive and --tol-psd nonnegative".into(),
        ));
    }
    match &cli.command {
        Command::Certify { g, n } => certify(*g, n, c),
        Command::Gap { z, n } => gap(*z, n, c),
        Command::Baseline { g, per_group } => {
            json_only(c, "baseline").and_then(|_| baseline(*g, *per_group))
        }
        Command::SolveTiny { per_group, n } => {
            json_only(c, "solve-tiny").and_then(|_| solve_tiny(*per_group, *n))
        }
        Command::Identities { g, n } => {
            json_only(c, "identities").and_then(|_| identities(g, n.as_deref(), c))
        }
    }
}

fn json_only(c: &Common, command: &str) -> Result<(), CliError> {
    match c.format {
        Format::Json => Ok(()),
        Format::Csv => Err(CliError::Config(format!("{command} only writes JSON"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(failure)
}

fn sorted_unique(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub g: usize,
    pub n: usize,
    pub dense: bool,
    /// Objective of the certificate, evaluated blockwise.
    #[serde(with = "f64_str")]
    pub objective: f64,
    #[serde(with = "f64_str")]
    pub objective_closed_form: f64,
    /// Minimum eigenvalue of `Y` from the closed-form spectrum.
    #[serde(with = "f64_str")]
    pub min_closed_form_eigenvalue: f64,
    pub povh_rendl: Vec<FeasibilityReport>,
    pub anstreicher: Vec<AnstreicherReport>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOutput {
    pub g: usize,
    pub reports: Vec<CertifyReport>,
    pub pass: bool,
}

/// One CSV row per (n, relaxation, mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyRow {
    pub g: usize,
    pub n: usize,
    pub relaxation: String,
    pub mode: String,
    #[serde(with = "f64_str")]
    pub max_residual: f64,
    #[serde(with = "f64_str")]
    pub min_entry: f64,
    #[serde(with = "f64_str")]
    pub min_eigenvalue: f64,
    #[serde(with = "opt_f64_str")]
    pub spectrum_deviation: Option<f64>,
    pub pass: bool,
}

impl CertifyOutput {
    pub fn rows(&self) -> Vec<CertifyRow> {
        let mut rows = Vec::new();
        for r in &self.reports {
            for f in &r.povh_rendl {
                let mode = match f.mode {
                    VerifyMode::Structured => "structured",
                    VerifyMode::Dense => "dense",
                };
                rows.push(CertifyRow {
                    g: r.g,
                    n: r.n,
                    relaxation: "povh-rendl".into(),
                    mode: mode.into(),
                    max_residual: f.max_equality_residual(),
                    min_entry: f.min_entry,
                    min_eigenvalue: f
                        .min_numeric_eigenvalue
                        .unwrap_or(f.min_closed_form_eigenvalue),
                    spectrum_deviation: f.spectrum_deviation,
                    pass: f.pass,
                });
            }
            for a in &r.anstreicher {
                rows.push(CertifyRow {
                    g: r.g,
                    n: r.n,
                    relaxation: "anstreicher".into(),
                    mode: if a.dense { "dense" } else { "structured" }.into(),
                    max_residual: a
                        .residual_block_sum
                        .max(a.residual_trace_pattern)
                        .max(a.residual_f),
                    min_entry: a.min_entry,
                    min_eigenvalue: a.min_shifted_numeric.unwrap_or(a.min_shifted_eigenvalue),
                    spectrum_deviation: a.spectrum_deviation,
                    pass: a.pass,
                });
            }
        }
        rows
    }
}

fn write_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(failure)?;
    }
    let bytes = w.into_inner().map_err(failure)?;
    String::from_utf8(bytes).map_err(failure)
}

pub fn certify_report(
    g: usize,
    n: usize,
    dense: bool,
    tol: &FeasibilityTolerances,
    max_dim: usize,
) -> Result<CertifyReport, CliError> {
    let coeffs = coeffs_general(n, g)?;
    let y = assemble(&coeffs)?;
    let inst = SimplicialInstance::make_equal(g, n / g)?;
    let mut modes = vec![VerifyMode::Structured];
    if dense {
        modes.push(VerifyMode::Dense);
    }
    let povh_rendl = modes
        .iter()
        .map(|&m| verify_povh_rendl_capped(&y, tol, m, max_dim))
        .collect::<Result<Vec<_>, _>>()?;
    let anstreicher = modes
        .iter()
        .map(|&m| verify_anstreicher_capped(&y, m == VerifyMode::Dense, tol, max_dim))
        .collect::<Result<Vec<_>, _>>()?;
    let min_closed_form_eigenvalue = closed_form_spectrum(&coeffs).min_value() / (2.0 * n as f64);
    let pass = povh_rendl.iter().all(|r| r.pass) && anstreicher.iter().all(|r| r.pass);
    Ok(CertifyReport {
        g,
        n,
        dense,
        objective: objective_povh_rendl(&inst, &y)?,
        objective_closed_form: objective_closed_form(&coeffs),
        min_closed_form_eigenvalue,
        povh_rendl,
        anstreicher,
        pass,
    })
}

fn certify(g: usize, ns: &[usize], c: &Common) -> Result<Outcome, CliError> {
    let ns = sorted_unique(ns);
    let max_dim = max_dense()?;
    // validate every size before any verification work
    for &n in &ns {
        coeffs_general(n, g)?;
        if c.dense && n * n > max_dim {
            return Err(CliError::Config(format!(
                "dense verification at n = {n} needs dimension {} above the cap {max_dim}; set {MAX_DENSE_ENV} to raise it",
                n * n
            )));
        }
    }
    let tol = FeasibilityTolerances {
        eq: c.tol_eq,
        psd: c.tol_psd,
        ..FeasibilityTolerances::default()
    };
    let reports = ns
        .iter()
        .map(|&n| certify_report(g, n, c.dense, &tol, max_dim))
        .collect::<Result<Vec<_>, _>>()?;
    let out = CertifyOutput {
        g,
        pass: reports.iter().all(|r| r.pass),
        reports,
    };
    let body = match c.format {
        Format::Json => to_json(&out)?,
        Format::Csv => write_csv(&out.rows())?,
    };
    Ok(Outcome::new(out.pass, body))
}

fn gap(z: usize, ns: &[usize], c: &Common) -> Result<Outcome, CliError> {
    let table = gap_table(z, ns)?;
    let pass = table.iter().all(|r| r.certified);
    let body = match c.format {
        Format::Json => to_json(&table)?,
        Format::Csv => gap_table_csv(&table)?,
    };
    Ok(Outcome::new(pass, body))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub g: usize,
    pub per_group: usize,
    pub n_total: usize,
    #[serde(with = "f64_str")]
    pub tsp_analytic: f64,
    /// Held–Karp value, absent above the DP vertex cap.
    #[serde(with = "opt_f64_str")]
    pub tsp_dp: Option<f64>,
    pub dp_skipped: bool,
    pub subtour: LpEdgeSolution,
    pub dp_agrees: Option<bool>,
    pub subtour_agrees: bool,
    pub pass: bool,
}

pub fn baseline_report(g: usize, per_group: usize) -> Result<BaselineReport, CliError> {
    if g < 2 || per_group < 1 {
        return Err(CliError::Config(format!(
            "baseline needs g >= 2 and per-group >= 1, got g = {g}, per-group = {per_group}"
        )));
    }
    let inst = SimplicialInstance::from_group_sizes(vec![per_group; g])?;
    let n_total = inst.n_total();
    let analytic = tsp_optimum(&inst, TspMethod::Analytic)?.value;
    let dp = if n_total <= DP_MAX_VERTICES {
        Some(tsp_optimum(&inst, TspMethod::Dp)?.value)
    } else {
        None
    };
    let subtour = solve_subtour(&inst)?;
    let dp_agrees = dp.map(|v| (v - analytic).abs() <= 1e-9);
    let subtour_agrees =
        subtour.status == LpStatus::Optimal && (subtour.objective - analytic).abs() <= LP_TOL;
    Ok(BaselineReport {
        g,
        per_group,
        n_total,
        tsp_analytic: analytic,
        tsp_dp: dp,
        dp_skipped: dp.is_none(),
        pass: dp_agrees.unwrap_or(true) && subtour_agrees,
        subtour,
        dp_agrees,
        subtour_agrees,
    })
}

fn baseline(g: usize, per_group: usize) -> Result<Outcome, CliError> {
    let r = baseline_report(g, per_group)?;
    Ok(Outcome::new(r.pass, to_json(&r)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyReport {
    pub per_group: usize,
    pub vertices: usize,
    pub dim: usize,
    #[serde(with = "f64_str")]
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(with = "f64_str")]
    pub max_equality_residual: f64,
    #[serde(with = "f64_str")]
    pub min_eigenvalue: f64,
    #[serde(with = "f64_str")]
    pub min_entry: f64,
    /// Reduced objective of the certificate on the same instance, when one
    /// exists.
    #[serde(with = "opt_f64_str")]
    pub certificate_value: Option<f64>,
    pub nonmonotonicity: Option<NonMonotonicityReport>,
    pub pass: bool,
}

pub fn tiny_report(per_group: usize, large_n: usize) -> Result<TinyReport, CliError> {
    let inst = SimplicialInstance::make_one_extra(2, per_group)?;
    let red = build_reduction(&inst, 0, 0)?;
    let problem = encode_reduced(&inst, &red)?;
    let opts = SolveOptions::default();
    let sol = solve(&problem, &opts)?;
    let n = 2 * per_group;
    let certificate_value = if n > 2 {
        let y = assemble(&coeffs_general(n, 2)?)?;
        Some(objective_reduced(&y, &red)?.total())
    } else {
        None
    };
    let nonmonotonicity = if per_group == 1 {
        Some(nonmonotonicity_check_with(large_n, &opts)?)
    } else {
        None
    };
    let pass = sol.converged
        && certificate_value.is_none_or(|c| sol.objective_value <= c + TINY_TOL)
        && nonmonotonicity
            .as_ref()
            .is_none_or(|r| r.non_monotonic && (sol.objective_value - 2.0).abs() <= TINY_TOL);
    Ok(TinyReport {
        per_group,
        vertices: inst.n_total(),
        dim: problem.dim,
        value: sol.objective_value,
        converged: sol.converged,
        iterations: sol.iterations,
        max_equality_residual: sol.max_equality_residual,
        min_eigenvalue: sol.min_eigenvalue,
        min_entry: sol.min_entry,
        certificate_value,
        nonmonotonicity,
        pass,
    })
}

fn solve_tiny(per_group: usize, large_n: usize) -> Result<Outcome, CliError> {
    let r = tiny_report(per_group, large_n)?;
    Ok(Outcome::new(r.pass, to_json(&r)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityEntry {
    pub g: usize,
    pub n: usize,
    pub trigonometric: IdentityReport,
    /// Coefficient identities, for layouts that admit a certificate.
    pub coefficients: Option<IdentityReport>,
    #[serde(with = "f64_str")]
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentitiesOutput {
    #[serde(with = "f64_str")]
    pub tolerance: f64,
    pub entries: Vec<IdentityEntry>,
    #[serde(with = "f64_str")]
    pub max_residual: f64,
    pub pass: bool,
}

pub fn identities_output(
    gs: &[usize],
    ns: &[usize],
    tolerance: f64,
) -> Result<IdentitiesOutput, CliError> {
    let mut entries = Vec::new();
    for &g in &sorted_unique(gs) {
        for &n in &sorted_unique(ns) {
            let trigonometric = identity_suite(g, n)?;
            let coefficients = if n % g == 0 && n > g {
                Some(coefficient_identities(n, g)?)
            } else {
                None
            };
            let max_residual = trigonometric
                .max_residual()
                .max(coefficients.as_ref().map_or(0.0, |c| c.max_residual()));
            entries.push(IdentityEntry {
                g,
                n,
                trigonometric,
                coefficients,
                max_residual,
            });
        }
    }
    let max_residual = entries.iter().map(|e| e.max_residual).fold(0.0, f64::max);
    Ok(IdentitiesOutput {
        tolerance,
        pass: max_residual <= tolerance,
        entries,
        max_residual,
    })
}

fn identities(gs: &[usize], ns: Option<&[usize]>, c: &Common) -> Result<Outcome, CliError> {
    let default_ns: Vec<usize> = (4..=200).step_by(2).collect();
    let out = identities_output(gs, ns.unwrap_or(&default_ns), c.tol_eq)?;
    Ok(Outcome::new(out.pass, to_json(&out)?))
}
