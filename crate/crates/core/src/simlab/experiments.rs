//! Monte Carlo experiments over the built-in processes.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::dgp::Dgp;
use crate::error::{Error, Result};
use crate::estimators::{decompose_en, estimate_tau_bc, EstimateReport};
use crate::inference::{
    bootstrap_ci, bootstrap_from_report, density_ratio, kolmogorov_detail, GaussianMultipliers,
};
use crate::matching::{match_mnn, stabilization_radius};
use crate::numeric::{mean, sample_variance, unit_ball_volume, variance_standard_error};
use crate::regress::{fit, RegressorSpec};
use crate::rng::{derive_key, Purpose};

/// How the outcome surfaces are obtained inside each replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regression {
    Fitted(RegressorSpec),
    /// The process's true surfaces.
    Oracle,
}

impl Default for Regression {
    fn default() -> Self {
        Regression::Fitted(RegressorSpec::knn())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCell {
    pub n: usize,
    #[serde(rename = "M")]
    pub num_matches: usize,
    pub value: f64,
    pub mc_se: f64,
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub experiment: String,
    pub dgp: String,
    pub seed: u64,
    pub reps: usize,
    pub cells: Vec<McCell>,
    pub summary: BTreeMap<String, f64>,
}

impl McReport {
    fn single(experiment: &str, dgp: &Dgp, seed: u64, reps: usize, cell: McCell) -> Self {
        McReport {
            experiment: experiment.to_string(),
            dgp: dgp.name.clone(),
            seed,
            reps,
            cells: vec![cell],
            summary: BTreeMap::new(),
        }
    }

    /// Grid values in cell order.
    pub fn values(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.value).collect()
    }

    pub fn mc_se(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.mc_se).collect()
    }

    /// Append the cells of another run of the same experiment.
    pub fn extend(&mut self, other: McReport) {
        self.cells.extend(other.cells);
        for (k, v) in other.summary {
            *self.summary.entry(k).or_insert(0.0) += v;
        }
    }
}

/// Standard error of a proportion `q` over `trials`, floored at one trial's resolution.
fn proportion_se(q: f64, trials: usize) -> f64 {
    let t = trials as f64;
    (q * (1.0 - q) / t).sqrt().max(1.0 / t)
}

fn require_reps(reps: usize, min: usize) -> Result<()> {
    if reps < min {
        return Err(Error::invalid("reps", format!("need at least {min} replications, got {reps}")));
    }
    Ok(())
}

/// Fit-and-estimate for replication `rep`.
fn replicate_estimate(
    dgp: &Dgp,
    n: usize,
    num_matches: usize,
    seed: u64,
    rep: usize,
    regression: &Regression,
) -> Result<EstimateReport> {
    let ds = dgp.generate_rep(n, seed, rep as u64)?;
    let mr = match_mnn(&ds, num_matches)?;
    let rp = match regression {
        Regression::Fitted(spec) => fit(&ds, spec)?,
        Regression::Oracle => dgp.oracle(),
    };
    estimate_tau_bc(&ds, &mr, &rp)
}

/// Kolmogorov distance between `sqrt(n)(tau_bc - tau)` over replications and `N(0, sigma^2)`.
pub fn mc_kolmogorov(
    dgp: &Dgp,
    n: usize,
    num_matches: usize,
    reps: usize,
    seed: u64,
    regression: &Regression,
) -> Result<McReport> {
    require_reps(reps, 100)?;
    let sigma2 = dgp.sigma2()?;
    let tau = dgp.tau();
    let root_n = (n as f64).sqrt();
    let stats: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            replicate_estimate(dgp, n, num_matches, seed, rep, regression)
                .map(|r| root_n * (r.tau_hat_bc - tau))
        })
        .collect::<Result<_>>()?;
    let ks = kolmogorov_detail(&stats, 0.0, sigma2.sqrt())?;
    let mut extra = BTreeMap::new();
    extra.insert("sigma2".to_string(), sigma2);
    extra.insert("stat_mean".to_string(), mean(&stats));
    extra.insert("stat_var".to_string(), sample_variance(&stats));
    extra.insert("argmax".to_string(), ks.at);
    let cell = McCell {
        n,
        num_matches,
        value: ks.distance,
        mc_se: proportion_se(ks.cdf, reps),
        extra,
    };
    Ok(McReport::single("kolmogorov", dgp, seed, reps, cell))
}

/// Empirical coverage of the bootstrap intervals for the process's `tau`.
#[allow(clippy::too_many_arguments)]
pub fn mc_coverage(
    dgp: &Dgp,
    n: usize,
    num_matches: usize,
    b: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    regression: &Regression,
) -> Result<McReport> {
    require_reps(reps, 200)?;
    let tau = dgp.tau();
    let boot_root = derive_key(seed, Purpose::BootstrapSeed as u64);
    let hits: Vec<(bool, bool, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let report = replicate_estimate(dgp, n, num_matches, seed, rep, regression)?;
            let bseed = derive_key(boot_root, rep as u64);
            let bd = bootstrap_from_report(&report, b, bseed, &GaussianMultipliers { seed: bseed })?;
            let ci = bootstrap_ci(&bd, report.tau_hat_bc, alpha)?;
            let inside = |iv: [f64; 2]| iv[0] <= tau && tau <= iv[1];
            Ok((inside(ci.analytic), inside(ci.percentile), ci.analytic[1] - ci.analytic[0]))
        })
        .collect::<Result<_>>()?;
    let frac = |pick: fn(&(bool, bool, f64)) -> bool| {
        hits.iter().filter(|h| pick(h)).count() as f64 / reps as f64
    };
    let analytic = frac(|h| h.0);
    let percentile = frac(|h| h.1);
    let widths: Vec<f64> = hits.iter().map(|h| h.2).collect();
    let mut extra = BTreeMap::new();
    extra.insert("alpha".to_string(), alpha);
    extra.insert("B".to_string(), b as f64);
    extra.insert("percentile_coverage".to_string(), percentile);
    extra.insert("percentile_mc_se".to_string(), proportion_se(percentile, reps));
    extra.insert("mean_width".to_string(), mean(&widths));
    let cell = McCell {
        n,
        num_matches,
        value: analytic,
        mc_se: proportion_se(analytic, reps),
        extra,
    };
    Ok(McReport::single("coverage", dgp, seed, reps, cell))
}

/// `n` times the across-replication variance of the main term, with the
/// variance floor and limiting variance of the process.
pub fn mc_variance(dgp: &Dgp, n: usize, num_matches: usize, reps: usize, seed: u64) -> Result<McReport> {
    require_reps(reps, 4)?;
    let truth = dgp.oracle();
    let en: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let ds = dgp.generate_rep(n, seed, rep as u64)?;
            let mr = match_mnn(&ds, num_matches)?;
            decompose_en(&ds, &mr, &truth).map(|dec| dec.e_n)
        })
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let pop = dgp.population();
    let mut extra = BTreeMap::new();
    extra.insert("floor".to_string(), pop.variance_floor);
    extra.insert("sigma2".to_string(), pop.sigma2);
    extra.insert("mean_e_n".to_string(), mean(&en));
    let cell = McCell {
        n,
        num_matches,
        value: nf * sample_variance(&en),
        mc_se: nf * variance_standard_error(&en),
        extra,
    };
    Ok(McReport::single("variance", dgp, seed, reps, cell))
}

/// Tail envelope `e^2 exp(-V_m g_min eta n r^m / max(2M, 8))`.
pub fn radius_tail_bound(m: usize, g_min: f64, eta: f64, n: usize, num_matches: usize, r: f64) -> f64 {
    let divisor = (2 * num_matches).max(8) as f64;
    let rate = unit_ball_volume(m) * g_min * eta * n as f64 * r.powi(m as i32) / divisor;
    std::f64::consts::E.powi(2) * (-rate).exp()
}

/// Pooled survival of stabilization radii against the tail envelope, one cell per radius.
pub fn mc_radius_tail(
    dgp: &Dgp,
    n: usize,
    num_matches: usize,
    reps: usize,
    r_grid: &[f64],
    seed: u64,
) -> Result<McReport> {
    if n < 9 {
        return Err(Error::invalid("n", format!("need at least 9 units, got {n}")));
    }
    require_reps(reps, 1)?;
    let counts: Vec<Vec<usize>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let ds = dgp.generate_rep(n, seed, rep as u64)?;
            let mut radii = stabilization_radius(&match_mnn(&ds, num_matches)?);
            radii.sort_by(f64::total_cmp);
            Ok(r_grid
                .iter()
                .map(|&r| radii.len() - radii.partition_point(|&v| v < r))
                .collect())
        })
        .collect::<Result<_>>()?;
    let pooled = (reps * n) as f64;
    let mut violations = 0usize;
    let cells = r_grid
        .iter()
        .enumerate()
        .map(|(g, &r)| {
            let survival = counts.iter().map(|c| c[g]).sum::<usize>() as f64 / pooled;
            let bound = radius_tail_bound(dgp.m, dgp.g_min, dgp.eta_star, n, num_matches, r);
            let violated = survival > bound;
            violations += violated as usize;
            let mut extra = BTreeMap::new();
            extra.insert("r".to_string(), r);
            extra.insert("bound".to_string(), bound);
            extra.insert("violated".to_string(), violated as u8 as f64);
            McCell {
                n,
                num_matches,
                value: survival,
                mc_se: proportion_se(survival, reps * n),
                extra,
            }
        })
        .collect();
    let mut summary = BTreeMap::new();
    summary.insert("violations".to_string(), violations as f64);
    Ok(McReport {
        experiment: "radius-tail".to_string(),
        dgp: dgp.name.clone(),
        seed,
        reps,
        cells,
        summary,
    })
}

/// Mean density-ratio estimate over the control units of one sample, with
/// its standard error `sd / sqrt(n0)`.
pub fn mc_density_ratio(dgp: &Dgp, n: usize, num_matches: usize, seed: u64) -> Result<McReport> {
    let ds = dgp.generate_rep(n, seed, 0)?;
    let mr = match_mnn(&ds, num_matches)?;
    let ratios: Vec<f64> = (0..n)
        .filter(|&i| ds.d()[i] == 0)
        .map(|i| density_ratio(&ds, &mr, i))
        .collect::<Result<_>>()?;
    let se = sample_variance(&ratios).sqrt() / (ratios.len() as f64).sqrt();
    let mut extra = BTreeMap::new();
    extra.insert("n0".to_string(), ratios.len() as f64);
    let cell = McCell {
        n,
        num_matches,
        value: mean(&ratios),
        mc_se: se,
        extra,
    };
    Ok(McReport::single("density-ratio", dgp, seed, 1, cell))
}
