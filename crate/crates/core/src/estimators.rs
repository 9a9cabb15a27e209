//! Matching estimators of the average treatment effect: covariate, rank and
//! transformed-coordinate variants, all sharing one bias-corrected core.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matching::{match_in_coords, MatchResult, SearchStrategy};
use crate::numeric::pairwise_sum;
use crate::regress::{fit_in_coords, RegressorPair, RegressorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Covariate,
    Rank,
    Phi,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "covariate" => Ok(Method::Covariate),
            "rank" => Ok(Method::Rank),
            "phi" => Ok(Method::Phi),
            other => Err(Error::invalid("method", format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    #[serde(rename = "M")]
    pub num_matches: usize,
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    /// Raw matching estimate.
    pub tau_hat: f64,
    pub tau_hat_bc: f64,
    /// Regression-only part `mean(mu1_hat - mu0_hat)`.
    pub tau_reg: f64,
    /// Main term, available only when the true surfaces are known.
    pub e_n: Option<f64>,
    /// Matching bias under the true surfaces.
    pub b_m: Option<f64>,
    /// Matching bias under the fitted surfaces.
    pub b_hat_m: f64,
    /// `Y_i - mu_hat_{D_i}` at unit `i`'s own coordinates.
    pub residuals: Vec<f64>,
    pub k_count: Vec<usize>,
    /// Units where some prediction falls outside the training box.
    pub extrapolated: usize,
    #[serde(skip)]
    pub delta_mu: Vec<f64>,
    #[serde(skip)]
    pub treatment: Vec<u8>,
}

impl EstimateReport {
    /// `(2 D_i - 1)(1 + K_i / M) R_i`, the weighted residual of unit `i`.
    pub fn weighted_residual(&self, i: usize) -> f64 {
        sign(self.treatment[i]) * weight(self.k_count[i], self.num_matches) * self.residuals[i]
    }

    pub fn with_decomposition(mut self, dec: Decomposition) -> Self {
        self.e_n = Some(dec.e_n);
        self.b_m = Some(dec.b_m);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub e_n: f64,
    pub b_m: f64,
}

#[inline]
fn sign(d: u8) -> f64 {
    if d == 1 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn weight(k: usize, num_matches: usize) -> f64 {
    1.0 + k as f64 / num_matches as f64
}

fn check_consistent(ds: &Dataset, mr: &MatchResult) -> Result<()> {
    if mr.n() != ds.n() || mr.treatment() != ds.d() {
        return Err(Error::invalid(
            "match_result",
            "match result was not computed from this dataset",
        ));
    }
    Ok(())
}

/// Raw matching estimate in its weighted form `(1/n) sum (2D-1)(1+K/M) Y`.
pub fn estimate_tau_raw(ds: &Dataset, mr: &MatchResult) -> Result<f64> {
    check_consistent(ds, mr)?;
    let terms: Vec<f64> = (0..ds.n())
        .map(|i| sign(ds.d()[i]) * mr.weight(i) * ds.y()[i])
        .collect();
    Ok(pairwise_sum(&terms) / ds.n() as f64)
}

/// Bias-corrected estimate on the dataset's own covariates.
pub fn estimate_tau_bc(ds: &Dataset, mr: &MatchResult, rp: &RegressorPair) -> Result<EstimateReport> {
    check_consistent(ds, mr)?;
    if rp.m() != ds.m() {
        return Err(Error::invalid("regressor", "dimension differs from the dataset"));
    }
    Ok(corrected(
        ds,
        [ds.x_flat(), ds.x_flat()],
        mr,
        rp,
        Method::Covariate,
    ))
}

/// Shared core: arm-`w` quantities are evaluated at the rows of `coords[w]`.
fn corrected(
    ds: &Dataset,
    coords: [&[f64]; 2],
    mr: &MatchResult,
    rp: &RegressorPair,
    method: Method,
) -> EstimateReport {
    let n = ds.n();
    let d = ds.d();
    let y = ds.y();
    let mu = [rp.predict_rows(0, coords[0]), rp.predict_rows(1, coords[1])];
    let delta_mu: Vec<f64> = (0..n).map(|i| mu[1][i] - mu[0][i]).collect();
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - mu[d[i] as usize][i]).collect();

    let raw: Vec<f64> = (0..n).map(|i| sign(d[i]) * mr.weight(i) * y[i]).collect();
    let corr: Vec<f64> = (0..n)
        .map(|i| sign(d[i]) * mr.weight(i) * residuals[i])
        .collect();
    let tau_reg = pairwise_sum(&delta_mu) / n as f64;
    let tau_hat_bc = tau_reg + pairwise_sum(&corr) / n as f64;

    let m = rp.m();
    let extrapolated = (0..n)
        .filter(|&i| {
            (0..2u8).any(|w| rp.extrapolates(w, &coords[w as usize][i * m..(i + 1) * m]))
        })
        .count();

    EstimateReport {
        method,
        num_matches: mr.num_matches,
        n,
        n0: mr.n0,
        n1: mr.n1,
        tau_hat: pairwise_sum(&raw) / n as f64,
        tau_hat_bc,
        tau_reg,
        e_n: None,
        b_m: None,
        b_hat_m: matching_bias(d, mr, &mu),
        residuals,
        k_count: mr.k_count.clone(),
        extrapolated,
        delta_mu,
        treatment: d.to_vec(),
    }
}

/// `(1/n) sum_i (2D_i-1) (1/M) sum_m [mu_{1-D_i}(i) - mu_{1-D_i}(j_m(i))]`.
fn matching_bias(d: &[u8], mr: &MatchResult, mu: &[Vec<f64>; 2]) -> f64 {
    let terms: Vec<f64> = (0..d.len())
        .map(|i| {
            let other = &mu[1 - d[i] as usize];
            let gaps: f64 = mr.neighbors(i).iter().map(|&j| other[i] - other[j]).sum();
            sign(d[i]) * gaps / mr.num_matches as f64
        })
        .collect();
    pairwise_sum(&terms) / d.len() as f64
}

/// Main term and true-surface matching bias; needs the true surfaces.
pub fn decompose_en(ds: &Dataset, mr: &MatchResult, truth: &RegressorPair) -> Result<Decomposition> {
    check_consistent(ds, mr)?;
    if !truth.is_oracle() {
        return Err(Error::OracleRequired(
            "the main term needs the true noise, observable only with known surfaces",
        ));
    }
    let (n, d, y) = (ds.n(), ds.d(), ds.y());
    let mu = [truth.predict_rows(0, ds.x_flat()), truth.predict_rows(1, ds.x_flat())];
    let delta: Vec<f64> = (0..n).map(|i| mu[1][i] - mu[0][i]).collect();
    let noise: Vec<f64> = (0..n)
        .map(|i| sign(d[i]) * mr.weight(i) * (y[i] - mu[d[i] as usize][i]))
        .collect();
    Ok(Decomposition {
        e_n: pairwise_sum(&delta) / n as f64 + pairwise_sum(&noise) / n as f64,
        b_m: matching_bias(d, mr, &mu),
    })
}

/// Component-wise empirical CDF of the sample, evaluated at the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTransform {
    n: usize,
    m: usize,
    /// `n x m`, row-major.
    pub l_hat: Vec<f64>,
    sorted_columns: Vec<Vec<f64>>,
}

impl RankTransform {
    /// `F_hat_{n,k}(x) = #{j : X_{jk} <= x} / n`.
    pub fn ecdf(&self, k: usize, x: f64) -> f64 {
        let col = &self.sorted_columns[k];
        col.partition_point(|&v| v <= x) as f64 / self.n as f64
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.l_hat[i * self.m..(i + 1) * self.m]
    }
}

pub fn rank_transform(ds: &Dataset) -> RankTransform {
    let (n, m) = (ds.n(), ds.m());
    let sorted_columns: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut col: Vec<f64> = (0..n).map(|i| ds.x(i)[k]).collect();
            col.sort_by(f64::total_cmp);
            col
        })
        .collect();
    let mut rt = RankTransform {
        n,
        m,
        l_hat: Vec::with_capacity(n * m),
        sorted_columns,
    };
    for i in 0..n {
        for k in 0..m {
            let v = rt.ecdf(k, ds.x(i)[k]);
            rt.l_hat.push(v);
        }
    }
    rt
}

/// A map from covariates to matching coordinates.
pub trait CoordinateTransform: Send + Sync {
    fn out_dim(&self, m: usize) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl CoordinateTransform for Identity {
    fn out_dim(&self, m: usize) -> usize {
        m
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

/// Common positive scaling.
#[derive(Debug, Clone, Copy)]
pub struct Scale(pub f64);

impl CoordinateTransform for Scale {
    fn out_dim(&self, m: usize) -> usize {
        m
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.0 * v;
        }
    }
}

/// Component-wise empirical CDF of a reference sample.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf(pub RankTransform);

impl EmpiricalCdf {
    pub fn of(ds: &Dataset) -> Self {
        EmpiricalCdf(rank_transform(ds))
    }
}

impl CoordinateTransform for EmpiricalCdf {
    fn out_dim(&self, m: usize) -> usize {
        m
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (k, (o, v)) in out.iter_mut().zip(x).enumerate() {
            *o = self.0.ecdf(k, *v);
        }
    }
}

/// Writes the image of a point into the output slice.
pub type PointMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Arbitrary closure transform, e.g. a known population CDF.
#[derive(Clone)]
pub struct FnTransform {
    pub dim: usize,
    pub f: PointMap,
}

impl CoordinateTransform for FnTransform {
    fn out_dim(&self, _m: usize) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Apply `phi` to every unit, rejecting non-finite output.
pub fn transform_all(ds: &Dataset, phi: &dyn CoordinateTransform) -> Result<(usize, Vec<f64>)> {
    let dim = phi.out_dim(ds.m());
    if dim == 0 {
        return Err(Error::invalid("transform", "output dimension must be positive"));
    }
    let mut out = vec![0.0; ds.n() * dim];
    for i in 0..ds.n() {
        let row = &mut out[i * dim..(i + 1) * dim];
        phi.apply(ds.x(i), row);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteTransform { unit: i });
        }
    }
    Ok((dim, out))
}

/// Matches in rank space together with the ranks themselves.
pub fn rank_match(ds: &Dataset, num_matches: usize) -> Result<(RankTransform, MatchResult)> {
    let rt = rank_transform(ds);
    let mr = match_in_coords(
        ds.d(),
        [&rt.l_hat, &rt.l_hat],
        ds.m(),
        num_matches,
        SearchStrategy::Auto,
    )?;
    Ok((rt, mr))
}

/// Fit both arms on rank coordinates.
pub fn fit_rank(ds: &Dataset, spec: &RegressorSpec) -> Result<RegressorPair> {
    let rt = rank_transform(ds);
    fit_in_coords(ds.d(), ds.y(), [&rt.l_hat, &rt.l_hat], ds.m(), spec)
}

/// Bias-corrected estimate after matching on empirical-CDF ranks.
pub fn estimate_tau_rank(ds: &Dataset, num_matches: usize, rp_rank: &RegressorPair) -> Result<EstimateReport> {
    let (rt, mr) = rank_match(ds, num_matches)?;
    if rp_rank.m() != ds.m() {
        return Err(Error::invalid("regressor", "dimension differs from the dataset"));
    }
    Ok(corrected(ds, [&rt.l_hat, &rt.l_hat], &mr, rp_rank, Method::Rank))
}

/// Per-arm transformed coordinates `[phi0(X), phi1(X)]` of every unit.
pub fn phi_coords(
    ds: &Dataset,
    phi0: &dyn CoordinateTransform,
    phi1: &dyn CoordinateTransform,
) -> Result<(usize, [Vec<f64>; 2])> {
    let (dim0, z0) = transform_all(ds, phi0)?;
    let (dim1, z1) = transform_all(ds, phi1)?;
    if dim0 != dim1 {
        return Err(Error::invalid("transform", "both arms must map to the same dimension"));
    }
    Ok((dim0, [z0, z1]))
}

/// Matching where arm `w` is searched in `phi_w` coordinates; its `k_count`
/// is `K_phi`, or `K*_phi` when true transforms are passed.
pub fn phi_match(
    ds: &Dataset,
    num_matches: usize,
    phi0: &dyn CoordinateTransform,
    phi1: &dyn CoordinateTransform,
) -> Result<MatchResult> {
    let (dim, z) = phi_coords(ds, phi0, phi1)?;
    match_in_coords(ds.d(), [&z[0], &z[1]], dim, num_matches, SearchStrategy::Auto)
}

pub fn fit_phi(
    ds: &Dataset,
    phi0: &dyn CoordinateTransform,
    phi1: &dyn CoordinateTransform,
    spec: &RegressorSpec,
) -> Result<RegressorPair> {
    let (dim, z) = phi_coords(ds, phi0, phi1)?;
    fit_in_coords(ds.d(), ds.y(), [&z[0], &z[1]], dim, spec)
}

/// Bias-corrected estimate with arm-specific coordinate transforms.
pub fn estimate_tau_phi(
    ds: &Dataset,
    num_matches: usize,
    phi0: &dyn CoordinateTransform,
    phi1: &dyn CoordinateTransform,
    rp_phi: &RegressorPair,
) -> Result<EstimateReport> {
    let (dim, z) = phi_coords(ds, phi0, phi1)?;
    if rp_phi.m() != dim {
        return Err(Error::invalid("regressor", "dimension differs from the transform output"));
    }
    let mr = match_in_coords(ds.d(), [&z[0], &z[1]], dim, num_matches, SearchStrategy::Auto)?;
    Ok(corrected(ds, [&z[0], &z[1]], &mr, rp_phi, Method::Phi))
}
