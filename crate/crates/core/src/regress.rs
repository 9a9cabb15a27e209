//! Outcome-regression surfaces used for bias correction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matching::{NeighborIndex, SearchStrategy};

/// A real-valued function of a covariate vector.
pub type SurfaceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

const RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Knn,
    #[serde(rename = "poly")]
    Polynomial,
    Oracle,
}

impl std::str::FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(RegressorKind::Knn),
            "poly" | "polynomial" => Ok(RegressorKind::Polynomial),
            "oracle" => Ok(RegressorKind::Oracle),
            other => Err(Error::invalid("regressor", format!("unknown regressor {other:?}"))),
        }
    }
}

/// Regressor choice plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub kind: RegressorKind,
    /// Neighbors for `knn`; `None` means `ceil(n_w^(4/(4+m)))` per arm.
    pub k: Option<usize>,
    /// Total degree for `poly`.
    pub degree: usize,
}

impl RegressorSpec {
    pub fn knn() -> Self {
        RegressorSpec {
            kind: RegressorKind::Knn,
            k: None,
            degree: 1,
        }
    }

    pub fn knn_with(k: usize) -> Self {
        RegressorSpec {
            k: Some(k),
            ..Self::knn()
        }
    }

    pub fn polynomial(degree: usize) -> Self {
        RegressorSpec {
            kind: RegressorKind::Polynomial,
            k: None,
            degree,
        }
    }
}

impl Default for RegressorSpec {
    fn default() -> Self {
        Self::knn()
    }
}

/// Default knn window for an arm of `n_arm` units in dimension `m`.
pub fn default_k(n_arm: usize, m: usize) -> usize {
    let k = (n_arm as f64).powf(4.0 / (4.0 + m as f64)).ceil() as usize;
    k.clamp(1, n_arm.max(1))
}

#[derive(Clone)]
enum Surface {
    Knn { index: Box<NeighborIndex>, k: usize },
    Poly { exponents: Vec<Vec<u32>>, coef: Vec<f64> },
    Oracle(SurfaceFn),
}

impl Surface {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Surface::Knn { index, k } => index.knn_mean(x, *k),
            Surface::Poly { exponents, coef } => exponents
                .iter()
                .zip(coef)
                .map(|(e, c)| c * monomial(e, x))
                .sum(),
            Surface::Oracle(f) => f(x),
        }
    }
}

/// Fitted `(mu0, mu1)` pair.
#[derive(Clone)]
pub struct RegressorPair {
    kind: RegressorKind,
    m: usize,
    surfaces: [Surface; 2],
    /// Per-arm bounding box of the training coordinates.
    hull: [Option<(Vec<f64>, Vec<f64>)>; 2],
}

impl fmt::Debug for RegressorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegressorPair")
            .field("info", &self.info())
            .finish()
    }
}

/// Serializable summary of a fitted pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressorInfo {
    pub kind: RegressorKind,
    pub m: usize,
    /// knn window per arm `[k0, k1]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

impl RegressorPair {
    /// Wrap known surfaces; predictions reproduce them exactly.
    pub fn oracle(m: usize, mu0: SurfaceFn, mu1: SurfaceFn) -> Self {
        RegressorPair {
            kind: RegressorKind::Oracle,
            m,
            surfaces: [Surface::Oracle(mu0), Surface::Oracle(mu1)],
            hull: [None, None],
        }
    }

    /// Oracle pair with both surfaces identically zero.
    pub fn zero(m: usize) -> Self {
        let z: SurfaceFn = Arc::new(|_| 0.0);
        Self::oracle(m, z.clone(), z)
    }

    pub fn kind(&self) -> RegressorKind {
        self.kind
    }

    pub fn is_oracle(&self) -> bool {
        self.kind == RegressorKind::Oracle
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn info(&self) -> RegressorInfo {
        let k = match &self.surfaces {
            [Surface::Knn { k: k0, .. }, Surface::Knn { k: k1, .. }] => Some([*k0, *k1]),
            _ => None,
        };
        let degree = match &self.surfaces[0] {
            Surface::Poly { exponents, .. } => exponents
                .iter()
                .map(|e| e.iter().sum::<u32>() as usize)
                .max(),
            _ => None,
        };
        RegressorInfo {
            kind: self.kind,
            m: self.m,
            k,
            degree,
        }
    }

    /// Predicted mean outcome of arm `omega` at `x`.
    pub fn predict(&self, omega: u8, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.m);
        self.surfaces[omega as usize].predict(x)
    }

    /// Predictions of arm `omega` at every row of a row-major buffer.
    pub fn predict_rows(&self, omega: u8, coords: &[f64]) -> Vec<f64> {
        let surface = &self.surfaces[omega as usize];
        coords
            .par_chunks(self.m)
            .with_min_len(256)
            .map(|x| surface.predict(x))
            .collect()
    }

    /// Whether `x` lies outside the bounding box of arm `omega`'s training points.
    pub fn extrapolates(&self, omega: u8, x: &[f64]) -> bool {
        match &self.hull[omega as usize] {
            None => false,
            Some((lo, hi)) => x
                .iter()
                .zip(lo.iter().zip(hi))
                .any(|(v, (l, h))| v < l || v > h),
        }
    }
}

/// Fit both arms on the dataset's own covariates.
pub fn fit(ds: &Dataset, spec: &RegressorSpec) -> Result<RegressorPair> {
    fit_in_coords(ds.d(), ds.y(), [ds.x_flat(), ds.x_flat()], ds.m(), spec)
}

/// Fit arm `w` on the rows of `coords[w]` belonging to arm `w`.
pub fn fit_in_coords(
    d: &[u8],
    y: &[f64],
    coords: [&[f64]; 2],
    m: usize,
    spec: &RegressorSpec,
) -> Result<RegressorPair> {
    if spec.kind == RegressorKind::Oracle {
        return Err(Error::OracleRequired(
            "oracle surfaces come from a data-generating process, not from fitting",
        ));
    }
    let mut surfaces = Vec::with_capacity(2);
    let mut hull = [None, None];
    for omega in 0..2u8 {
        let members: Vec<usize> = (0..d.len()).filter(|&i| d[i] == omega).collect();
        if members.is_empty() {
            return Err(Error::EmptyArm { arm: omega });
        }
        let buf = coords[omega as usize];
        let values: Vec<f64> = members.iter().map(|&i| y[i]).collect();
        hull[omega as usize] = Some(bounding_box(buf, m, &members));
        let surface = match spec.kind {
            RegressorKind::Knn => {
                let k = spec.k.unwrap_or_else(|| default_k(members.len(), m));
                let needed = k.max(2);
                if k == 0 || members.len() < needed {
                    return Err(Error::invalid(
                        "k",
                        format!(
                            "arm {omega} has {} units but knn with k = {k} needs at least {needed}",
                            members.len()
                        ),
                    ));
                }
                let index = NeighborIndex::build_with_values(
                    buf,
                    m,
                    &members,
                    values,
                    SearchStrategy::Auto,
                );
                Surface::Knn { index: Box::new(index), k }
            }
            RegressorKind::Polynomial => {
                fit_polynomial(buf, m, &members, &values, spec.degree, omega)?
            }
            RegressorKind::Oracle => unreachable!(),
        };
        surfaces.push(surface);
    }
    let mu1 = surfaces.pop().unwrap();
    let mu0 = surfaces.pop().unwrap();
    Ok(RegressorPair {
        kind: spec.kind,
        m,
        surfaces: [mu0, mu1],
        hull,
    })
}

fn bounding_box(buf: &[f64], m: usize, members: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for &i in members {
        for k in 0..m {
            let v = buf[i * m + k];
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    (lo, hi)
}

/// Exponent vectors of all monomials in `m` variables with total degree `<= degree`,
/// in graded order.
pub fn monomial_exponents(m: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree as u32 {
        let mut cur = vec![0u32; m];
        push_compositions(&mut out, &mut cur, 0, total);
    }
    out
}

fn push_compositions(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for e in (0..=left).rev() {
        cur[pos] = e;
        push_compositions(out, cur, pos + 1, left - e);
    }
    cur[pos] = 0;
}

fn monomial(e: &[u32], x: &[f64]) -> f64 {
    e.iter()
        .zip(x)
        .map(|(&p, &v)| if p == 0 { 1.0 } else { v.powi(p as i32) })
        .product()
}

fn fit_polynomial(
    buf: &[f64],
    m: usize,
    members: &[usize],
    values: &[f64],
    degree: usize,
    omega: u8,
) -> Result<Surface> {
    let exponents = monomial_exponents(m, degree);
    let terms = exponents.len();
    if members.len() < terms {
        return Err(Error::InsufficientForDegree {
            degree,
            arm: omega,
            units: members.len(),
            terms,
        });
    }
    let design = DMatrix::from_fn(members.len(), terms, |r, c| {
        let i = members[r];
        monomial(&exponents[c], &buf[i * m..(i + 1) * m])
    });
    let mut gram = design.transpose() * &design;
    for t in 0..terms {
        gram[(t, t)] += RIDGE;
    }
    let rhs = design.transpose() * DVector::from_column_slice(values);
    let coef = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).ok_or_else(|| {
            Error::invalid("degree", format!("singular normal equations for arm {omega}"))
        })?,
    };
    Ok(Surface::Poly {
        exponents,
        coef: coef.iter().copied().collect(),
    })
}
