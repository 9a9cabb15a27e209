//! Command-line front end. Every run writes one JSON report holding the fully
//! resolved configuration, the result, and a `meta` block (version, time)
//! that is excluded from reproducibility comparisons.

use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{
    estimate_overlap, eval_bootstrap_bound, eval_cdf_rank_bound, eval_covariate_bound,
    eval_covariate_bound_simplified, eval_rank_bound, BootstrapTarget, BoundInputs, BoundMode,
};
use crate::data::load_csv;
use crate::error::{Error, Result};
use crate::estimators::{estimate_tau_bc, estimate_tau_rank, fit_rank, EstimateReport, Method};
use crate::inference::{bootstrap_ci, bootstrap_from_report, variance_components, GaussianMultipliers};
use crate::matching::match_mnn;
use crate::regress::{fit, RegressorInfo, RegressorKind, RegressorSpec};
use crate::simlab::{
    mc_coverage, mc_density_ratio, mc_kolmogorov, mc_radius_tail, mc_variance, Dgp, McReport,
    Regression,
};

pub const THREADS_ENV: &str = "ATE_MATCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ate-match", version, about = "Matching estimators of the average treatment effect")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimates from a CSV sample.
    Estimate(EstimateArgs),
    /// Multiplier-bootstrap confidence intervals.
    Bootstrap(BootstrapArgs),
    /// Evaluate approximation-bound rate values.
    Bounds(BoundsArgs),
    /// Run a Monte Carlo experiment.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// covariate or rank
    #[arg(long, default_value = "covariate")]
    pub method: String,
    /// knn, poly or oracle
    #[arg(long, default_value = "knn")]
    pub regressor: String,
    /// knn window (default ceil(n_w^(4/(4+m))) per arm)
    #[arg(long)]
    pub k: Option<usize>,
    /// Polynomial total degree.
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    /// Built-in process supplying oracle surfaces.
    #[arg(long)]
    pub dgp: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub matches: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub matches: usize,
    #[arg(long, default_value_t = 2000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: f64,
    #[arg(long)]
    pub matches: f64,
    /// Overlap; estimated from --input when omitted.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub dim_prime: Option<usize>,
    /// covariate, covariate-simplified, rank, cdf, bootstrap or bootstrap-rank
    #[arg(long, default_value = "covariate")]
    pub mode: String,
    #[arg(long, default_value_t = 1.0)]
    pub r0: f64,
    /// Comma-separated regularity exponents.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub phi_modulus: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi_sup_pow: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m_l: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m_u_p: f64,
    #[arg(long, default_value_t = 0.0)]
    pub e1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub e2: f64,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// kolmogorov, coverage, variance, radius-tail or density-ratio
    #[arg(long)]
    pub experiment: String,
    #[arg(long, default_value = "linear-1d")]
    pub dgp: String,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// A fixed count, or `n^a` for ceil(n^a) per sample size.
    #[arg(long)]
    pub matches: String,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    /// Bootstrap replicates per replication (coverage).
    #[arg(long, default_value_t = 2000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated radii (radius-tail); default 20 points on [0, 0.095].
    #[arg(long, value_delimiter = ',')]
    pub r_grid: Vec<f64>,
    /// knn, poly or oracle
    #[arg(long, default_value = "knn")]
    pub regressor: String,
    /// Override the process's noise standard deviation.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Number of matches, fixed or as a power of the sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchRule {
    Fixed(usize),
    Power(f64),
}

impl MatchRule {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(a) = s.strip_prefix("n^") {
            let a: f64 = a
                .parse()
                .map_err(|_| Error::invalid("matches", format!("bad exponent in {s:?}")))?;
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::invalid("matches", "exponent must lie in (0, 1)"));
            }
            return Ok(MatchRule::Power(a));
        }
        match s.parse::<usize>() {
            Ok(v) if v > 0 => Ok(MatchRule::Fixed(v)),
            _ => Err(Error::invalid("matches", format!("expected a positive integer or n^a, got {s:?}"))),
        }
    }

    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            MatchRule::Fixed(v) => v,
            MatchRule::Power(a) => ((n as f64).powf(a).ceil() as usize).max(1),
        }
    }
}

/// Cap the global worker pool from the environment, once per process.
pub fn init_threads() {
    if let Some(k) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if k > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }
}

/// Run the CLI on `argv` (including the program name). Returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    0
                }
                _ => {
                    let obj = json!({
                        "error": {
                            "kind": "usage",
                            "flag": offending_flag(&err),
                            "message": usage_message(&err),
                        }
                    });
                    eprintln!("{obj}");
                    2
                }
            };
        }
    };
    init_threads();
    let (output, outcome) = match &cli.command {
        Command::Estimate(a) => (a.output.clone(), run_estimate(a)),
        Command::Bootstrap(a) => (a.output.clone(), run_bootstrap(a)),
        Command::Bounds(a) => (a.output.clone(), run_bounds(a)),
        Command::Simulate(a) => (a.output.clone(), run_simulate(a)),
    };
    let report = match outcome {
        Ok(report) => report,
        Err(e) => {
            eprintln!("{}", error_object(&e));
            return 2;
        }
    };
    match write_report(output.as_ref(), &report) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_object(&e));
            1
        }
    }
}

pub fn error_object(e: &Error) -> Value {
    let flag = match e {
        Error::InvalidArgument { name, .. } => Some(format!("--{}", name.replace('_', "-"))),
        Error::OracleRequired(_) => Some("--dgp".to_string()),
        Error::UnknownDgp(_) => Some("--dgp".to_string()),
        Error::InsufficientUnits { .. } => Some("--matches".to_string()),
        _ => None,
    };
    json!({ "error": { "kind": e.kind(), "flag": flag, "message": e.to_string() } })
}

fn offending_flag(err: &clap::Error) -> Option<String> {
    let first = |v: &ContextValue| match v {
        ContextValue::String(s) => Some(s.clone()),
        ContextValue::Strings(v) => v.first().cloned(),
        _ => None,
    };
    err.get(ContextKind::InvalidArg)
        .and_then(first)
        .and_then(|s| s.split_whitespace().next().map(str::to_string))
}

fn usage_message(err: &clap::Error) -> String {
    let text = err.render().to_string();
    let body = text.split("\n\nUsage").next().unwrap_or("");
    let body = body.strip_prefix("error: ").unwrap_or(body);
    body.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn write_report(path: Option<&PathBuf>, report: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.clone(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })
        }
    }
}

fn envelope(command: &str, config: impl Serialize, result: Value) -> Result<Value> {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(json!({
        "command": command,
        "config": serde_json::to_value(config)?,
        "result": result,
        "meta": { "version": env!("CARGO_PKG_VERSION"), "timestamp_unix": secs },
    }))
}

/// Estimate for the CLI: fits the requested surfaces and runs the requested method.
fn fitted_estimate(ds: &crate::Dataset, matches: usize, fa: &FitArgs) -> Result<(EstimateReport, RegressorInfo)> {
    let method: Method = fa.method.parse()?;
    let kind: RegressorKind = fa.regressor.parse()?;
    let spec = RegressorSpec {
        kind,
        k: fa.k,
        degree: fa.degree,
    };
    match (method, kind) {
        (Method::Covariate, RegressorKind::Oracle) => {
            let name = fa.dgp.as_deref().ok_or(Error::OracleRequired(
                "--regressor oracle needs --dgp naming a built-in process",
            ))?;
            let dgp = Dgp::builtin(name)?;
            if dgp.m != ds.m() {
                return Err(Error::invalid("dgp", format!("process {name} has dimension {} but the data has {}", dgp.m, ds.m())));
            }
            let rp = dgp.oracle();
            let mr = match_mnn(ds, matches)?;
            Ok((estimate_tau_bc(ds, &mr, &rp)?, rp.info()))
        }
        (Method::Covariate, _) => {
            let mr = match_mnn(ds, matches)?;
            let rp = fit(ds, &spec)?;
            Ok((estimate_tau_bc(ds, &mr, &rp)?, rp.info()))
        }
        (Method::Rank, RegressorKind::Oracle) => Err(Error::invalid(
            "regressor",
            "oracle surfaces are defined on covariates, not ranks",
        )),
        (Method::Rank, _) => {
            let rp = fit_rank(ds, &spec)?;
            Ok((estimate_tau_rank(ds, matches, &rp)?, rp.info()))
        }
        (Method::Phi, _) => Err(Error::invalid(
            "method",
            "the command line supports covariate and rank",
        )),
    }
}

fn run_estimate(a: &EstimateArgs) -> Result<Value> {
    let ds = load_csv(&a.input)?;
    let (report, info) = fitted_estimate(&ds, a.matches, &a.fit)?;
    let variance = variance_components(&report);
    let result = json!({
        "estimate": report,
        "variance": variance,
        "regressor": info,
    });
    envelope("estimate", a, result)
}

fn run_bootstrap(a: &BootstrapArgs) -> Result<Value> {
    let ds = load_csv(&a.input)?;
    let (report, info) = fitted_estimate(&ds, a.matches, &a.fit)?;
    let bd = bootstrap_from_report(&report, a.replicates, a.seed, &GaussianMultipliers { seed: a.seed })?;
    let ci = bootstrap_ci(&bd, report.tau_hat_bc, a.alpha)?;
    let result = json!({
        "tau_hat": report.tau_hat,
        "tau_hat_bc": report.tau_hat_bc,
        "ci": ci,
        "conditional_sd": bd.conditional_sd,
        "replicate_mean": bd.mean(),
        "replicate_sd": bd.sd(),
        "B": bd.b,
        "seed": bd.seed,
        "regressor": info,
    });
    envelope("bootstrap", a, result)
}

fn run_bounds(a: &BoundsArgs) -> Result<Value> {
    let mode: BoundMode = a.mode.parse()?;
    let eta = match (a.eta, &a.input) {
        (Some(e), _) => e,
        (None, Some(path)) => estimate_overlap(&load_csv(path)?),
        (None, None) => return Err(Error::invalid("eta", "give --eta or --input to estimate it")),
    };
    let bi = BoundInputs {
        n: a.n,
        num_matches: a.matches,
        eta,
        p: a.p,
        m: a.dim,
        m_prime: a.dim_prime,
        r0: a.r0,
        gamma: a.gamma.clone(),
        phi_modulus: a.phi_modulus,
        phi_sup_pow: a.phi_sup_pow,
        m_l: a.m_l,
        m_u_p: a.m_u_p,
        e1: a.e1,
        e2: a.e2,
    };
    let report = match mode {
        BoundMode::Covariate => eval_covariate_bound(&bi)?,
        BoundMode::CovariateSimplified => eval_covariate_bound_simplified(&bi)?,
        BoundMode::Rank => eval_rank_bound(&bi)?,
        BoundMode::Cdf => eval_cdf_rank_bound(&bi)?,
        BoundMode::Bootstrap => eval_bootstrap_bound(&bi, BootstrapTarget::Covariate)?,
        BoundMode::BootstrapRank => eval_bootstrap_bound(&bi, BootstrapTarget::Rank)?,
    };
    let result = json!({ "inputs": bi, "bounds": report });
    envelope("bounds", a, result)
}

fn default_r_grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 * 0.005).collect()
}

fn run_simulate(a: &SimulateArgs) -> Result<Value> {
    let mut dgp = Dgp::builtin(&a.dgp)?;
    if let Some(sd) = a.noise_sd {
        if !(sd >= 0.0 && sd.is_finite()) {
            return Err(Error::invalid("noise_sd", "must be non-negative"));
        }
        dgp = dgp.with_noise_sd(sd);
    }
    let rule = MatchRule::parse(&a.matches)?;
    let regression = match a.regressor.parse::<RegressorKind>()? {
        RegressorKind::Oracle => Regression::Oracle,
        RegressorKind::Knn => Regression::Fitted(RegressorSpec::knn()),
        RegressorKind::Polynomial => Regression::Fitted(RegressorSpec::polynomial(1)),
    };
    let mut resolved = a.clone();
    if resolved.r_grid.is_empty() && a.experiment == "radius-tail" {
        resolved.r_grid = default_r_grid();
    }
    let mut combined: Option<McReport> = None;
    for &n in &a.n {
        let mm = rule.resolve(n);
        let rep = match a.experiment.as_str() {
            "kolmogorov" => mc_kolmogorov(&dgp, n, mm, a.reps, a.seed, &regression)?,
            "coverage" => mc_coverage(&dgp, n, mm, a.replicates, a.alpha, a.reps, a.seed, &regression)?,
            "variance" => mc_variance(&dgp, n, mm, a.reps, a.seed)?,
            "radius-tail" => mc_radius_tail(&dgp, n, mm, a.reps, &resolved.r_grid, a.seed)?,
            "density-ratio" => mc_density_ratio(&dgp, n, mm, a.seed)?,
            other => return Err(Error::invalid("experiment", format!("unknown experiment {other:?}"))),
        };
        match combined.as_mut() {
            Some(c) => c.extend(rep),
            None => combined = Some(rep),
        }
    }
    let report = combined.ok_or_else(|| Error::invalid("n", "no sample sizes given"))?;
    let result = json!({
        "report": report,
        "values": report.values(),
        "mc_se": report.mc_se(),
    });
    envelope("simulate", resolved, result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn match_rules() {
        assert_eq!(MatchRule::parse("8").unwrap().resolve(100), 8);
        assert_eq!(MatchRule::parse("n^0.25").unwrap().resolve(4000), 8);
        assert_eq!(MatchRule::parse("n^0.3").unwrap().resolve(2000), 10);
        assert!(MatchRule::parse("0").is_err());
        assert!(MatchRule::parse("n^2").is_err());
    }

    #[test]
    fn missing_flag_is_named() {
        let err = Cli::try_parse_from(["ate-match", "estimate", "--matches", "1"]).unwrap_err();
        assert_eq!(offending_flag(&err).as_deref(), Some("--input"));
    }
}
