//! Variance components, density ratios, the multiplier bootstrap and
//! Kolmogorov distances.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{estimate_tau_bc, EstimateReport};
use crate::matching::MatchResult;
use crate::numeric::{pairwise_sum, quantile_sorted, std_normal_cdf, std_normal_quantile};
use crate::regress::RegressorPair;
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReport {
    pub sigma2_hat: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// `n` times the across-replication variance of the main term (simulation only).
    pub n_var_en: Option<f64>,
}

/// Centered regression contrasts `Delta mu_hat(X_i) - mean`, exactly zero when
/// the contrast is constant.
fn centered_contrasts(report: &EstimateReport) -> Vec<f64> {
    let delta = &report.delta_mu;
    if delta.iter().all(|&v| v == delta[0]) {
        return vec![0.0; delta.len()];
    }
    let mean = pairwise_sum(delta) / delta.len() as f64;
    delta.iter().map(|v| v - mean).collect()
}

/// `K1 + K2 + K3` from an existing estimate.
pub fn variance_components(report: &EstimateReport) -> VarianceReport {
    let n = report.n as f64;
    let centered = centered_contrasts(report);
    let sq: Vec<f64> = centered.iter().map(|a| a * a).collect();
    let k1 = pairwise_sum(&sq) / n;
    let arm = |w: u8| {
        let terms: Vec<f64> = (0..report.n)
            .filter(|&i| report.treatment[i] == w)
            .map(|i| report.weighted_residual(i).powi(2))
            .collect();
        pairwise_sum(&terms) / n
    };
    let (k2, k3) = (arm(1), arm(0));
    VarianceReport {
        sigma2_hat: k1 + k2 + k3,
        k1,
        k2,
        k3,
        n_var_en: None,
    }
}

pub fn estimate_sigma2(ds: &Dataset, mr: &MatchResult, rp: &RegressorPair) -> Result<VarianceReport> {
    Ok(variance_components(&estimate_tau_bc(ds, mr, rp)?))
}

/// Nearest-neighbor density-ratio estimate at unit `i`:
/// `(n0/n1) K(i)/M` for a control unit, `(n1/n0) K(i)/M` for a treated one.
pub fn density_ratio(ds: &Dataset, mr: &MatchResult, i: usize) -> Result<f64> {
    if i >= ds.n() {
        return Err(Error::invalid("unit", format!("index {i} out of range for n = {}", ds.n())));
    }
    let (n0, n1) = (mr.n0 as f64, mr.n1 as f64);
    if mr.n0 == 0 {
        return Err(Error::EmptyArm { arm: 0 });
    }
    if mr.n1 == 0 {
        return Err(Error::EmptyArm { arm: 1 });
    }
    let ratio = if ds.d()[i] == 0 { n0 / n1 } else { n1 / n0 };
    Ok(ratio * mr.k_count[i] as f64 / mr.num_matches as f64)
}

/// Supplies the multipliers `(V_i, W_i)` of one replicate.
pub trait MultiplierSource: Sync {
    fn fill(&self, replicate: usize, v: &mut [f64], w: &mut [f64]);
}

/// `V_i ~ N(0,1)`, `W_i ~ N(1,1)`, drawn unit by unit from the replicate's substream.
#[derive(Debug, Clone, Copy)]
pub struct GaussianMultipliers {
    pub seed: u64,
}

impl MultiplierSource for GaussianMultipliers {
    fn fill(&self, replicate: usize, v: &mut [f64], w: &mut [f64]) {
        let mut rng = substream(self.seed, Purpose::Bootstrap, replicate as u64);
        for (vi, wi) in v.iter_mut().zip(w.iter_mut()) {
            *vi = StandardNormal.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            *wi = 1.0 + z;
        }
    }
}

/// Constant multipliers, for tests.
#[derive(Debug, Clone, Copy)]
pub struct FixedMultipliers {
    pub v: f64,
    pub w: f64,
}

impl MultiplierSource for FixedMultipliers {
    fn fill(&self, _replicate: usize, v: &mut [f64], w: &mut [f64]) {
        v.fill(self.v);
        w.fill(self.w);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapDistribution {
    pub replicates: Vec<f64>,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    /// `sqrt(K1 + K2 + K3) / sqrt(n)`.
    pub conditional_sd: f64,
    pub tau_hat_bc: f64,
}

impl BootstrapDistribution {
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.replicates) / self.b as f64
    }

    pub fn sd(&self) -> f64 {
        crate::numeric::sample_variance(&self.replicates).sqrt()
    }
}

/// Multiplier bootstrap with frozen matched counts and fitted surfaces.
pub fn multiplier_bootstrap(
    ds: &Dataset,
    mr: &MatchResult,
    rp: &RegressorPair,
    b: usize,
    seed: u64,
) -> Result<BootstrapDistribution> {
    let report = estimate_tau_bc(ds, mr, rp)?;
    bootstrap_from_report(&report, b, seed, &GaussianMultipliers { seed })
}

/// Bootstrap replicates around any estimate (covariate, rank or transformed).
pub fn bootstrap_from_report(
    report: &EstimateReport,
    b: usize,
    seed: u64,
    source: &dyn MultiplierSource,
) -> Result<BootstrapDistribution> {
    if b == 0 {
        return Err(Error::invalid("replicates", "need at least one replicate"));
    }
    let n = report.n;
    let centered = centered_contrasts(report);
    let corr: Vec<f64> = (0..n).map(|i| report.weighted_residual(i)).collect();
    let replicates: Vec<f64> = (0..b)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], vec![0.0; n], vec![0.0; n]),
            |(v, w, buf), rep| {
                source.fill(rep, v, w);
                for i in 0..n {
                    buf[i] = corr[i] * w[i];
                }
                let resid_part = pairwise_sum(buf) / n as f64;
                for i in 0..n {
                    buf[i] = centered[i] * v[i];
                }
                let contrast_part = pairwise_sum(buf) / n as f64;
                report.tau_reg + resid_part + contrast_part
            },
        )
        .collect();
    let vr = variance_components(report);
    Ok(BootstrapDistribution {
        replicates,
        b,
        seed,
        conditional_sd: vr.sigma2_hat.sqrt() / (n as f64).sqrt(),
        tau_hat_bc: report.tau_hat_bc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceIntervals {
    pub alpha: f64,
    /// From the quantiles of `tau_boot - tau_hat_bc`, reflected around `tau_hat_bc`.
    pub percentile: [f64; 2],
    /// `tau_hat_bc -/+ z_{1-alpha/2} * conditional_sd`.
    pub analytic: [f64; 2],
}

pub fn bootstrap_ci(bd: &BootstrapDistribution, tau_hat_bc: f64, alpha: f64) -> Result<ConfidenceIntervals> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let need = (20.0 / alpha).ceil() as usize;
    if bd.b < need {
        return Err(Error::TooFewReplicates {
            have: bd.b,
            need,
            alpha,
        });
    }
    let mut dev: Vec<f64> = bd.replicates.iter().map(|r| r - bd.tau_hat_bc).collect();
    dev.sort_by(f64::total_cmp);
    let lo_q = quantile_sorted(&dev, alpha / 2.0);
    let hi_q = quantile_sorted(&dev, 1.0 - alpha / 2.0);
    let z = std_normal_quantile(1.0 - alpha / 2.0);
    Ok(ConfidenceIntervals {
        alpha,
        percentile: [tau_hat_bc - hi_q, tau_hat_bc - lo_q],
        analytic: [tau_hat_bc - z * bd.conditional_sd, tau_hat_bc + z * bd.conditional_sd],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KolmogorovDetail {
    pub distance: f64,
    /// Sample point where the supremum is attained.
    pub at: f64,
    /// Reference CDF value there.
    pub cdf: f64,
}

/// `sup_t |F_hat(t) - Phi((t - mean)/sd)|` over the sample.
pub fn kolmogorov_distance(sample: &[f64], mean: f64, sd: f64) -> Result<f64> {
    Ok(kolmogorov_detail(sample, mean, sd)?.distance)
}

pub fn kolmogorov_detail(sample: &[f64], mean: f64, sd: f64) -> Result<KolmogorovDetail> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::invalid("sd", format!("must be positive and finite, got {sd}")));
    }
    if sample.is_empty() {
        return Err(Error::invalid("sample", "empty sample"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut best = KolmogorovDetail {
        distance: -1.0,
        at: xs[0],
        cdf: 0.0,
    };
    let mut i = 0;
    while i < xs.len() {
        let t = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == t {
            j += 1;
        }
        let f = std_normal_cdf((t - mean) / sd);
        let gap = (j as f64 / n - f).abs().max((i as f64 / n - f).abs());
        if gap > best.distance {
            best = KolmogorovDetail {
                distance: gap,
                at: t,
                cdf: f,
            };
        }
        i = j;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::match_mnn;

    #[test]
    fn kolmogorov_examples() {
        assert!((kolmogorov_distance(&[0.0], 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let n = 100;
        let q: Vec<f64> = (1..=n)
            .map(|i| std_normal_quantile((i as f64 - 0.5) / n as f64))
            .collect();
        assert!((kolmogorov_distance(&q, 0.0, 1.0).unwrap() - 0.005).abs() < 1e-12);
        let shifted: Vec<f64> = q.iter().map(|v| v + 10.0).collect();
        assert!(kolmogorov_distance(&shifted, 0.0, 1.0).unwrap() >= 0.999);
        assert!(kolmogorov_distance(&q, 0.0, 0.0).is_err());
        assert!(kolmogorov_distance(&[], 0.0, 1.0).is_err());
    }

    #[test]
    fn kolmogorov_handles_ties() {
        // two atoms at the median: the jump spans 0 -> 1
        let d = kolmogorov_distance(&[0.0, 0.0], 0.0, 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn toy_density_ratio() {
        let ds = Dataset::univariate(
            vec![0.1, 0.2, 0.4, 0.9],
            vec![1, 0, 1, 0],
            vec![1.0, 0.0, 2.0, 1.0],
        )
        .unwrap();
        let mr = match_mnn(&ds, 1).unwrap();
        assert_eq!(density_ratio(&ds, &mr, 1).unwrap(), 2.0);
        assert_eq!(density_ratio(&ds, &mr, 3).unwrap(), 0.0);
        assert!(density_ratio(&ds, &mr, 4).is_err());
    }

    #[test]
    fn single_pair_variance() {
        let ds = Dataset::univariate(vec![0.0, 1.0], vec![1, 0], vec![3.0, -1.0]).unwrap();
        let mr = match_mnn(&ds, 1).unwrap();
        let vr = estimate_sigma2(&ds, &mr, &RegressorPair::zero(1)).unwrap();
        assert_eq!(vr.k1, 0.0);
        assert_eq!(vr.k2, 4.0 * 9.0 / 2.0);
        assert_eq!(vr.k3, 4.0 * 1.0 / 2.0);
        assert_eq!(vr.sigma2_hat, vr.k1 + vr.k2 + vr.k3);
    }

    #[test]
    fn ci_requires_enough_replicates() {
        let bd = BootstrapDistribution {
            replicates: vec![1.0; 100],
            b: 100,
            seed: 0,
            conditional_sd: 0.0,
            tau_hat_bc: 1.0,
        };
        assert!(matches!(
            bootstrap_ci(&bd, 1.0, 0.05),
            Err(Error::TooFewReplicates { need: 400, .. })
        ));
        let ci = bootstrap_ci(&bd, 1.0, 0.5).unwrap();
        assert_eq!(ci.percentile, [1.0, 1.0]);
        assert_eq!(ci.analytic, [1.0, 1.0]);
        assert!(bootstrap_ci(&bd, 1.0, 1.0).is_err());
    }
}
