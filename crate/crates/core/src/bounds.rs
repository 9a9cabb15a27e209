//! Closed-form rate values of the Gaussian and bootstrap approximation bounds.
//!
//! Every unnamed universal constant is taken to be 1, so each number is a
//! rate value rather than a literal probability bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matching::{NeighborIndex, SearchStrategy};
use crate::regress::default_k;

pub const RATE_LABEL: &str = "rate value (all universal constants set to 1)";

/// Threshold below which the simplified forms flag `eta` as not bounded away from 0.
pub const ETA_FLOOR: f64 = 0.05;

fn default_p() -> f64 {
    1.0
}
fn one() -> f64 {
    1.0
}
fn default_m() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: f64,
    #[serde(rename = "M")]
    pub num_matches: f64,
    pub eta: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Transformed dimension; defaults to `m`.
    #[serde(default)]
    pub m_prime: Option<usize>,
    /// Within-group density-ratio constant in the delta terms.
    #[serde(default = "one")]
    pub r0: f64,
    /// Regularity exponents `gamma_1, gamma_2, ...`; missing entries repeat the
    /// last one, and an empty list means 0.5 throughout.
    #[serde(default)]
    pub gamma: Vec<f64>,
    /// Expected modulus of continuity of the transform error (B5).
    #[serde(default)]
    pub phi_modulus: f64,
    /// Expected `2m`-th power of the sup transform error with two inserted points (B6).
    #[serde(default)]
    pub phi_sup_pow: f64,
    #[serde(default = "one")]
    pub m_l: f64,
    #[serde(default = "one")]
    pub m_u_p: f64,
    #[serde(default)]
    pub e1: f64,
    #[serde(default)]
    pub e2: f64,
}

impl BoundInputs {
    pub fn new(n: f64, num_matches: f64, eta: f64, p: f64, m: usize) -> Self {
        BoundInputs {
            n,
            num_matches,
            eta,
            p,
            m,
            m_prime: None,
            r0: 1.0,
            gamma: Vec::new(),
            phi_modulus: 0.0,
            phi_sup_pow: 0.0,
            m_l: 1.0,
            m_u_p: 1.0,
            e1: 0.0,
            e2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("matches", self.num_matches),
            ("eta", self.eta),
            ("p", self.p),
            ("r0", self.r0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        let non_negative = [
            ("phi_modulus", self.phi_modulus),
            ("phi_sup_pow", self.phi_sup_pow),
            ("m_l", self.m_l),
            ("m_u_p", self.m_u_p),
            ("e1", self.e1),
            ("e2", self.e2),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be non-negative and finite, got {v}")));
            }
        }
        if self.eta > 0.5 {
            return Err(Error::invalid("eta", format!("must be at most 1/2, got {}", self.eta)));
        }
        if self.p > 1.0 {
            return Err(Error::invalid("p", format!("must lie in (0, 1], got {}", self.p)));
        }
        if self.m == 0 || self.m_prime == Some(0) {
            return Err(Error::invalid("dim", "dimensions must be positive"));
        }
        if self.gamma.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::invalid("gamma", "exponents must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.p / (16.0 + 2.0 * self.p)
    }

    pub fn zeta(&self) -> f64 {
        self.p / (40.0 + 10.0 * self.p)
    }

    pub fn m_prime(&self) -> usize {
        self.m_prime.unwrap_or(self.m)
    }

    pub fn gamma_l(&self, l: usize) -> f64 {
        self.gamma
            .get(l - 1)
            .or(self.gamma.last())
            .copied()
            .unwrap_or(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaTerms {
    pub delta_h1: f64,
    pub delta_h2: f64,
    pub delta_h3: f64,
}

pub fn eval_delta_terms(bi: &BoundInputs) -> DeltaTerms {
    let (n, mm, eta) = (bi.n, bi.num_matches, bi.eta);
    let ln2 = std::f64::consts::LN_2;
    let tail = (-(1.0 - ln2) * mm).exp();
    let r = bi.r0 * n * eta;
    let poisson = (mm - r - mm * mm.ln() + mm * r.ln()).exp();
    let s = tail + poisson;
    let ratio = n / (mm * eta);
    DeltaTerms {
        delta_h1: 1.0 / (n * n * eta.powi(4)) + ratio * ratio * s * s,
        delta_h2: (mm / (n * eta)).powf(1.0 / bi.m as f64) + 1.0 / (n * eta) + n / mm * s,
        delta_h3: ratio * ratio * tail,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    Covariate,
    CovariateSimplified,
    Rank,
    Cdf,
    Bootstrap,
    BootstrapRank,
}

impl std::str::FromStr for BoundMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "covariate" => Ok(BoundMode::Covariate),
            "covariate-simplified" => Ok(BoundMode::CovariateSimplified),
            "rank" => Ok(BoundMode::Rank),
            "cdf" => Ok(BoundMode::Cdf),
            "bootstrap" => Ok(BoundMode::Bootstrap),
            "bootstrap-rank" => Ok(BoundMode::BootstrapRank),
            other => Err(Error::invalid("mode", format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub mode: BoundMode,
    pub label: &'static str,
    pub delta_h1: f64,
    pub delta_h2: f64,
    pub delta_h3: f64,
    pub b_terms: Vec<BoundTerm>,
    pub total: f64,
    /// Named summands inside the B terms.
    pub components: BTreeMap<String, f64>,
    /// Side conditions (with their constants set to 1) and max-branch bookkeeping.
    pub regime_flags: BTreeMap<String, bool>,
    pub vacuous: bool,
    /// Lower bound on the bootstrap conditional variance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability_floor: Option<f64>,
}

impl BoundReport {
    fn new(mode: BoundMode, bi: &BoundInputs) -> Self {
        let dt = eval_delta_terms(bi);
        let mut regime_flags = BTreeMap::new();
        regime_flags.insert("M_le_n_eta".to_string(), bi.num_matches <= bi.n * bi.eta);
        regime_flags.insert("n_eta2_ge_1".to_string(), bi.n * bi.eta * bi.eta >= 1.0);
        regime_flags.insert("n_ge_9".to_string(), bi.n >= 9.0);
        BoundReport {
            mode,
            label: RATE_LABEL,
            delta_h1: dt.delta_h1,
            delta_h2: dt.delta_h2,
            delta_h3: dt.delta_h3,
            b_terms: Vec::new(),
            total: 0.0,
            components: BTreeMap::new(),
            regime_flags,
            vacuous: false,
            variance_floor: None,
            probability_floor: None,
        }
    }

    fn push(&mut self, name: &str, value: f64) {
        self.b_terms.push(BoundTerm {
            name: name.to_string(),
            value,
        });
    }

    fn component(&mut self, name: &str, value: f64) {
        self.components.insert(name.to_string(), value);
    }

    fn flag(&mut self, name: &str, value: bool) {
        self.regime_flags.insert(name.to_string(), value);
    }

    fn finish(mut self) -> Self {
        self.total = self.b_terms.iter().map(|t| t.value).sum();
        self
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.b_terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// B1 (also B4): the Gaussian approximation part of the main term.
fn b1(bi: &BoundInputs, rep: &mut BoundReport, prefix: &str) -> f64 {
    let (n, mm, eta, p) = (bi.n, bi.num_matches, bi.eta, bi.p);
    let base = mm / (bi.zeta() * eta);
    let a = base.powf(20.0 / (8.0 + p));
    let b = (mm / eta).powf((16.0 + 3.0 * p) / (16.0 + 2.0 * p));
    let c = base.powf(40.0 / (8.0 + p));
    rep.flag(&format!("{prefix}_M_over_zeta_eta_gt_1"), base > 1.0);
    rep.flag(&format!("{prefix}_M_over_eta_gt_1"), mm / eta > 1.0);
    let first = a.max(1.0) * b.max(1.0) / (bi.alpha() * n.sqrt());
    let second = c.max(1.0) / n.sqrt();
    rep.component(&format!("{prefix}.first"), first);
    rep.component(&format!("{prefix}.second"), second);
    first + second
}

/// `max_{l in [k-1]} n^{-gamma_l/2 - l/(2m) + 1/4} M^{l/(2m)}`, zero when `k = 1`.
fn regression_max(bi: &BoundInputs, k: usize, dim: usize) -> f64 {
    let (n, mm) = (bi.n, bi.num_matches);
    let two_m = 2.0 * dim as f64;
    (1..k)
        .map(|l| {
            let l_f = l as f64;
            n.powf(-bi.gamma_l(l) / 2.0 - l_f / two_m + 0.25) * mm.powf(l_f / two_m)
        })
        .fold(0.0, f64::max)
}

/// `max_{l in [k-1]} n^{-gamma_l/2 + 1/4} ((M/n)^{l/(2m)} + n^{-l/4})`, zero when `k = 1`.
fn rank_regression_max(bi: &BoundInputs, k: usize, dim: usize) -> f64 {
    let (n, mm) = (bi.n, bi.num_matches);
    let two_m = 2.0 * dim as f64;
    (1..k)
        .map(|l| {
            let l_f = l as f64;
            n.powf(-bi.gamma_l(l) / 2.0 + 0.25) * ((mm / n).powf(l_f / two_m) + n.powf(-l_f / 4.0))
        })
        .fold(0.0, f64::max)
}

fn leading_bias(bi: &BoundInputs, k: usize, dim: usize) -> f64 {
    let e = k as f64 / (2.0 * dim as f64);
    bi.num_matches.powf(e) * bi.n.powf(-e + 0.25)
}

/// B3 with dimension `dim` in its first summand (B6 uses `m'`).
fn variance_part(bi: &BoundInputs, rep: &BoundReport, dim: usize) -> f64 {
    let (n, mm, eta) = (bi.n, bi.num_matches, bi.eta);
    (1.0 / eta) * (mm / (n * eta)).powf(1.0 / (2.0 * dim as f64))
        + rep.delta_h1.sqrt()
        + (rep.delta_h2.sqrt() + 1.0) / (eta * mm.sqrt())
        + rep.delta_h3.sqrt()
        + 1.0 / (eta.powi(3) * n.cbrt())
}

pub fn eval_covariate_bound(bi: &BoundInputs) -> Result<BoundReport> {
    bi.validate()?;
    let mut rep = BoundReport::new(BoundMode::Covariate, bi);
    let (b1v, b2v, b3v) = covariate_terms(bi, &mut rep);
    rep.push("B1", b1v);
    rep.push("B2", b2v);
    rep.push("B3", b3v);
    Ok(rep.finish())
}

fn covariate_terms(bi: &BoundInputs, rep: &mut BoundReport) -> (f64, f64, f64) {
    let k = bi.m / 2 + 1;
    let b1v = b1(bi, rep, "B1");
    let factor = bi.eta.powf(-(k as f64) / (2.0 * bi.m as f64)) + rep.delta_h1.sqrt();
    let b2v = factor * (leading_bias(bi, k, bi.m) + regression_max(bi, k, bi.m));
    let b3v = variance_part(bi, rep, bi.m);
    (b1v, b2v, b3v)
}

pub fn eval_covariate_bound_simplified(bi: &BoundInputs) -> Result<BoundReport> {
    bi.validate()?;
    let mut rep = BoundReport::new(BoundMode::CovariateSimplified, bi);
    let (n, mm, p) = (bi.n, bi.num_matches, bi.p);
    let k = bi.m / 2 + 1;
    rep.flag("eta_bounded_away_from_0", bi.eta >= ETA_FLOOR);
    rep.push("B1'", mm.powf(40.0 / (8.0 + p)) / n.sqrt());
    rep.push("B2'", leading_bias(bi, k, bi.m) + regression_max(bi, k, bi.m));
    let first = (mm / n).powf(1.0 / (2.0 * bi.m as f64));
    rep.component("B3'.first", first);
    rep.push("B3'", first + 1.0 / mm.sqrt() + 1.0 / n.cbrt());
    Ok(rep.finish())
}

pub fn eval_rank_bound(bi: &BoundInputs) -> Result<BoundReport> {
    bi.validate()?;
    let mut rep = BoundReport::new(BoundMode::Rank, bi);
    let (b4, b5, b6) = rank_terms(bi, &mut rep);
    rep.push("B4", b4);
    rep.push("B5", b5);
    rep.push("B6", b6);
    Ok(rep.finish())
}

fn rank_terms(bi: &BoundInputs, rep: &mut BoundReport) -> (f64, f64, f64) {
    let (n, mm) = (bi.n, bi.num_matches);
    let mp = bi.m_prime();
    let k = (mp / 2).max(1) + 1;
    let b4 = b1(bi, rep, "B4");

    let factor = bi.eta.powf(-(k as f64) / (2.0 * mp as f64)) + rep.delta_h1.sqrt();
    let modulus = n.powf(0.25) * bi.phi_modulus.sqrt();
    let inner = leading_bias(bi, k, mp)
        + rank_regression_max(bi, k, mp)
        + n.powf(-(k as f64) / 4.0 + 0.25)
        + modulus;
    rep.component("B5.phi_modulus", factor * modulus);
    let b5 = factor * inner;

    let phi_sup = (n / mm).powf(bi.m as f64 / mp as f64) * (n * n / (mm * mm) * bi.phi_sup_pow).powf(0.25);
    rep.component("B6.phi_sup", phi_sup);
    let b6 = variance_part(bi, rep, mp) + phi_sup;
    (b4, b5, b6)
}

pub fn eval_cdf_rank_bound(bi: &BoundInputs) -> Result<BoundReport> {
    bi.validate()?;
    let mut rep = BoundReport::new(BoundMode::Cdf, bi);
    let (n, mm, p, m) = (bi.n, bi.num_matches, bi.p, bi.m);
    let k = (m / 2).max(1) + 1;
    let b4 = mm.powf(40.0 / (8.0 + p)) / n.sqrt();
    rep.flag("eta_bounded_away_from_0", bi.eta >= ETA_FLOOR);
    rep.flag("B4'_le_1", b4 <= 1.0);
    rep.push("B4'", b4);
    rep.push(
        "B5'",
        leading_bias(bi, k, m) + rank_regression_max(bi, k, m) + n.powf(-0.25),
    );
    let branch = match m {
        1 => mm.powf(-0.25),
        2 => (1.0 / (mm * n)).powf(1.0 / 6.0),
        _ => mm.powf(-1.5) * n.powf((3.0 - m as f64) / 2.0),
    };
    rep.component("B6'.dimension_branch", branch);
    rep.push(
        "B6'",
        (mm / n).powf(1.0 / (2.0 * m as f64)) + 1.0 / mm.sqrt() + branch,
    );
    Ok(rep.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapTarget {
    Covariate,
    Rank,
}

/// Bootstrap approximation bound with its conditional-variance floor `L`.
pub fn eval_bootstrap_bound(bi: &BoundInputs, which: BootstrapTarget) -> Result<BoundReport> {
    bi.validate()?;
    let mode = match which {
        BootstrapTarget::Covariate => BoundMode::Bootstrap,
        BootstrapTarget::Rank => BoundMode::BootstrapRank,
    };
    let mut rep = BoundReport::new(mode, bi);
    let (names, (g1, g2, g3), err) = match which {
        BootstrapTarget::Covariate => (["B1", "B2"], covariate_terms(bi, &mut rep), bi.e1),
        BootstrapTarget::Rank => (["B4", "B5"], rank_terms(bi, &mut rep), bi.e2),
    };
    let n = bi.n;
    let floor = (bi.m_l
        - bi.m_u_p.sqrt() * n.powf(-1.0 / 3.0)
        - 2.0 * err * (bi.m_u_p + (2.0 * bi.m_u_p).powf(0.25) * n.powf(-5.0 / 12.0)))
    .max(0.0);
    rep.variance_floor = Some(floor);
    rep.vacuous = floor == 0.0;
    rep.flag("vacuous_bound_variance_floor_hit_zero", rep.vacuous);
    rep.probability_floor = Some(1.0 - (16.0 * g3).min(1.0));
    rep.component(if which == BootstrapTarget::Covariate { "B3" } else { "B6" }, g3);
    rep.push(names[0], g1);
    rep.push(names[1], g2);
    let scaled = (1.0 + err * err) * g3;
    let noise = err / bi.eta + 1.0 / (bi.eta * bi.eta * n.powf(0.25));
    let (t3, t4) = if rep.vacuous {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (scaled / floor, noise / floor)
    };
    rep.push("variance_over_L", t3);
    rep.push("regression_error_over_L", t4);
    Ok(rep.finish())
}

/// `M^{40/(8+p)} n^{-1/2} + M^{-1/2}`, the one-dimensional covariate rate.
pub fn dim1_rate(n: f64, p: f64, num_matches: f64) -> f64 {
    num_matches.powf(40.0 / (8.0 + p)) / n.sqrt() + 1.0 / num_matches.sqrt()
}

/// Integer `M` in `1..=n` minimizing the one-dimensional rate; ties go to the smaller `M`.
pub fn optimal_m_dim1(n: u64, p: f64) -> Result<u64> {
    optimal_m_dim1_scaled(n, p, 1.0)
}

/// As [`optimal_m_dim1`] with the first summand multiplied by `scale`.
pub fn optimal_m_dim1_scaled(n: u64, p: f64, scale: f64) -> Result<u64> {
    if n < 9 {
        return Err(Error::invalid("n", format!("must be at least 9, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid("scale", "must be positive"));
    }
    let nf = n as f64;
    let exponent = 40.0 / (8.0 + p);
    let f = |mm: f64| scale * mm.powf(exponent) / nf.sqrt() + 1.0 / mm.sqrt();
    let mut best = (1u64, f(1.0));
    for mm in 2..=n {
        let v = f(mm as f64);
        if v < best.1 {
            best = (mm, v);
        }
    }
    Ok(best.0)
}

/// Continuous `M` at which the two summands of the one-dimensional rate are equal.
pub fn balance_point(n: f64, p: f64) -> f64 {
    n.powf((8.0 + p) / (88.0 + p))
}

/// Overlap estimate `clip(min_i min(e_hat, 1 - e_hat), 0.01, 0.5)` from a knn propensity fit.
pub fn estimate_overlap(ds: &Dataset) -> f64 {
    let n = ds.n();
    let all: Vec<usize> = (0..n).collect();
    let labels: Vec<f64> = ds.d().iter().map(|&d| d as f64).collect();
    let index = NeighborIndex::build_with_values(ds.x_flat(), ds.m(), &all, labels, SearchStrategy::Auto);
    let k = default_k(n, ds.m());
    let worst = (0..n)
        .map(|i| {
            let e = index.knn_mean(ds.x(i), k);
            e.min(1.0 - e)
        })
        .fold(f64::INFINITY, f64::min);
    worst.clamp(0.01, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_h3_example() {
        let bi = BoundInputs::new(100.0, 10.0, 0.5, 1.0, 1);
        let want = 400.0 * (-(1.0 - 2f64.ln()) * 10.0).exp();
        assert!((eval_delta_terms(&bi).delta_h3 - want).abs() < 1e-12);
    }

    #[test]
    fn delta_limits() {
        let mut prev = f64::INFINITY;
        for mm in 1..60 {
            let h3 = eval_delta_terms(&BoundInputs::new(100.0, mm as f64, 0.5, 1.0, 1)).delta_h3;
            assert!(h3 < prev);
            prev = h3;
        }
        let small = eval_delta_terms(&BoundInputs::new(100.0, 10.0, 1e-3, 1.0, 1)).delta_h1;
        let tiny = eval_delta_terms(&BoundInputs::new(100.0, 10.0, 1e-5, 1.0, 1)).delta_h1;
        assert!(tiny > small && tiny > 1e10);
    }

    #[test]
    fn simplified_b3_for_dimension_one() {
        let bi = BoundInputs::new(1e4, 8.0, 0.45, 1.0, 1);
        let rep = eval_covariate_bound_simplified(&bi).unwrap();
        let want = (8.0f64 / 1e4).sqrt() + 8f64.powf(-0.5) + 1e4f64.powf(-1.0 / 3.0);
        assert!((rep.term("B3'").unwrap() - want).abs() < 1e-14);
        let full = BoundInputs::new(50.0, 50.0, 0.5, 1.0, 2);
        let rep = eval_covariate_bound_simplified(&full).unwrap();
        assert_eq!(rep.components["B3'.first"], 1.0);
    }

    #[test]
    fn b1_branch_flags_and_scaling() {
        let bi = BoundInputs::new(1e4, 8.0, 0.45, 1.0, 1);
        let rep = eval_covariate_bound(&bi).unwrap();
        assert!(rep.regime_flags["B1_M_over_zeta_eta_gt_1"]);
        let c = (8.0 / (bi.zeta() * 0.45)).powf(40.0 / 9.0) / 100.0;
        assert!((rep.components["B1.second"] - c).abs() < 1e-9 * c);
        let doubled = eval_covariate_bound(&BoundInputs::new(2e4, 8.0, 0.45, 1.0, 1)).unwrap();
        let r = rep.components["B1.second"] / doubled.components["B1.second"];
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cdf_branches() {
        let rep = eval_cdf_rank_bound(&BoundInputs::new(1e6, 16.0, 0.5, 1.0, 1)).unwrap();
        assert_eq!(rep.components["B6'.dimension_branch"], 0.5);
        let rep = eval_cdf_rank_bound(&BoundInputs::new(1e6, 16.0, 0.5, 1.0, 3)).unwrap();
        assert!((rep.components["B6'.dimension_branch"] - 16f64.powf(-1.5)).abs() < 1e-15);
        let n = 4096.0;
        let rep = eval_cdf_rank_bound(&BoundInputs::new(n, n, 0.5, 1.0, 2)).unwrap();
        assert!((rep.components["B6'.dimension_branch"] - n.powf(-1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_floor() {
        let mut bi = BoundInputs::new(1e6, 8.0, 0.5, 1.0, 1);
        let rep = eval_bootstrap_bound(&bi, BootstrapTarget::Covariate).unwrap();
        assert!((rep.variance_floor.unwrap() - 0.99).abs() < 1e-12);
        assert!(!rep.vacuous);
        let b3 = rep.components["B3"];
        let want = rep.term("B1").unwrap()
            + rep.term("B2").unwrap()
            + b3 / 0.99
            + 4.0 * 1e6f64.powf(-0.25) / 0.99;
        assert!((rep.total - want).abs() < 1e-12 * want);
        bi.e1 = 10.0;
        let rep = eval_bootstrap_bound(&bi, BootstrapTarget::Covariate).unwrap();
        assert!(rep.vacuous);
        assert_eq!(rep.variance_floor, Some(0.0));
        assert!(rep.total.is_infinite());
    }

    #[test]
    fn optimal_m_examples() {
        // exhaustive minimizer and continuous balance point differ at n = 1e6
        assert_eq!(optimal_m_dim1(1_000_000, 1.0).unwrap(), 3);
        assert!((balance_point(1e6, 1.0) - 10f64.powf(54.0 / 89.0)).abs() < 1e-12);
        assert_eq!(optimal_m_dim1(9, 1.0).unwrap(), 1);
        assert!(optimal_m_dim1(8, 1.0).is_err());
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        assert!(eval_covariate_bound(&BoundInputs::new(100.0, 5.0, 0.6, 1.0, 1)).is_err());
        assert!(eval_covariate_bound(&BoundInputs::new(100.0, 5.0, 0.5, 1.5, 1)).is_err());
        assert!(eval_covariate_bound(&BoundInputs::new(100.0, 0.0, 0.5, 1.0, 1)).is_err());
    }
}
