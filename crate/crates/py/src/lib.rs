//! Python bindings: datasets, matching, estimation, bootstrap intervals,
//! bound evaluation and simulated data.

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use ate_match_core::bounds::{
    eval_bootstrap_bound, eval_cdf_rank_bound, eval_covariate_bound, eval_covariate_bound_simplified,
    eval_rank_bound, optimal_m_dim1, BootstrapTarget, BoundInputs, BoundMode,
};
use ate_match_core::data::load_csv;
use ate_match_core::estimators::{estimate_tau_bc, estimate_tau_rank, fit_rank, Method};
use ate_match_core::inference::{
    bootstrap_ci, bootstrap_from_report, kolmogorov_distance as ks_distance, variance_components,
    GaussianMultipliers,
};
use ate_match_core::matching::match_mnn as core_match;
use ate_match_core::regress::{fit, RegressorKind, RegressorSpec};
use ate_match_core::simlab::Dgp;
use ate_match_core::{Error, RegressorPair};

create_exception!(ate_match, AteMatchError, PyValueError);

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => AteMatchError::new_err(format!("[{}] {}", other.kind(), other)),
    }
}

/// Serialize through JSON into plain Python containers.
fn to_python(py: Python<'_>, value: &impl Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Dataset", module = "ate_match", frozen)]
pub struct PyDataset {
    inner: ate_match_core::Dataset,
}

#[pymethods]
impl PyDataset {
    /// `x` is a list of covariate rows, `d` the 0/1 treatment labels, `y` the outcomes.
    #[new]
    fn new(x: Vec<Vec<f64>>, d: Vec<u8>, y: Vec<f64>) -> PyResult<Self> {
        let inner = ate_match_core::Dataset::from_rows(&x, d, y).map_err(to_py_err)?;
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    fn from_csv(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: load_csv(path).map_err(to_py_err)?,
        })
    }

    fn to_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write_csv(path).map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n_treated(&self) -> usize {
        self.inner.n_treated()
    }

    #[getter]
    fn n_control(&self) -> usize {
        self.inner.n_control()
    }

    #[getter]
    fn d(&self) -> Vec<u8> {
        self.inner.d().to_vec()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    fn x(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n() {
            return Err(pyo3::exceptions::PyIndexError::new_err(i));
        }
        Ok(self.inner.x(i).to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, m={}, treated={})",
            self.inner.n(),
            self.inner.m(),
            self.inner.n_treated()
        )
    }
}

#[pyclass(name = "MatchResult", module = "ate_match", frozen)]
pub struct PyMatchResult {
    inner: ate_match_core::MatchResult,
}

#[pymethods]
impl PyMatchResult {
    #[getter]
    fn num_matches(&self) -> usize {
        self.inner.num_matches
    }

    #[getter]
    fn k_count(&self) -> Vec<usize> {
        self.inner.k_count.clone()
    }

    #[getter]
    fn radius(&self) -> Vec<f64> {
        self.inner.radius.clone()
    }

    /// Indices of unit `i`'s matches, nearest first.
    fn neighbors(&self, i: usize) -> PyResult<Vec<usize>> {
        if i >= self.inner.n() {
            return Err(pyo3::exceptions::PyIndexError::new_err(i));
        }
        Ok(self.inner.neighbors(i).to_vec())
    }
}

#[pyclass(name = "Regressor", module = "ate_match", frozen)]
pub struct PyRegressor {
    inner: RegressorPair,
}

#[pymethods]
impl PyRegressor {
    /// Fit both outcome surfaces; `kind` is "knn" or "poly".
    #[staticmethod]
    #[pyo3(signature = (ds, kind = "knn", k = None, degree = 1))]
    fn fit(ds: &PyDataset, kind: &str, k: Option<usize>, degree: usize) -> PyResult<Self> {
        let spec = spec_from(kind, k, degree)?;
        Ok(PyRegressor {
            inner: fit(&ds.inner, &spec).map_err(to_py_err)?,
        })
    }

    /// True surfaces of a built-in process.
    #[staticmethod]
    fn oracle(dgp: &str) -> PyResult<Self> {
        Ok(PyRegressor {
            inner: Dgp::builtin(dgp).map_err(to_py_err)?.oracle(),
        })
    }

    fn predict(&self, omega: u8, x: Vec<f64>) -> PyResult<f64> {
        if omega > 1 || x.len() != self.inner.m() {
            return Err(PyValueError::new_err("need omega in {0, 1} and a point of the fitted dimension"));
        }
        Ok(self.inner.predict(omega, &x))
    }
}

fn spec_from(kind: &str, k: Option<usize>, degree: usize) -> PyResult<RegressorSpec> {
    let kind: RegressorKind = kind.parse().map_err(to_py_err)?;
    Ok(RegressorSpec { kind, k, degree })
}

#[pyfunction]
fn match_mnn(ds: &PyDataset, num_matches: usize) -> PyResult<PyMatchResult> {
    Ok(PyMatchResult {
        inner: core_match(&ds.inner, num_matches).map_err(to_py_err)?,
    })
}

fn run_estimate(
    ds: &PyDataset,
    num_matches: usize,
    method: &str,
    regressor: Option<&PyRegressor>,
    kind: &str,
    k: Option<usize>,
    degree: usize,
) -> PyResult<ate_match_core::EstimateReport> {
    let method: Method = method.parse().map_err(to_py_err)?;
    let spec = spec_from(kind, k, degree)?;
    match method {
        Method::Covariate => {
            let mr = core_match(&ds.inner, num_matches).map_err(to_py_err)?;
            let fitted;
            let rp = match regressor {
                Some(r) => &r.inner,
                None => {
                    fitted = fit(&ds.inner, &spec).map_err(to_py_err)?;
                    &fitted
                }
            };
            estimate_tau_bc(&ds.inner, &mr, rp).map_err(to_py_err)
        }
        Method::Rank => {
            let rp = fit_rank(&ds.inner, &spec).map_err(to_py_err)?;
            estimate_tau_rank(&ds.inner, num_matches, &rp).map_err(to_py_err)
        }
        Method::Phi => Err(PyValueError::new_err("method must be 'covariate' or 'rank'")),
    }
}

/// Matching estimates as a dict; pass `regressor` to reuse fitted or oracle surfaces.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (ds, num_matches, method = "covariate", regressor = None, kind = "knn", k = None, degree = 1))]
fn estimate(
    py: Python<'_>,
    ds: &PyDataset,
    num_matches: usize,
    method: &str,
    regressor: Option<&PyRegressor>,
    kind: &str,
    k: Option<usize>,
    degree: usize,
) -> PyResult<Py<PyAny>> {
    let report = run_estimate(ds, num_matches, method, regressor, kind, k, degree)?;
    let variance = variance_components(&report);
    to_python(py, &serde_json::json!({ "estimate": report, "variance": variance }))
}

#[pyfunction]
#[pyo3(signature = (ds, num_matches, replicates = 2000, alpha = 0.05, seed = 0, method = "covariate", kind = "knn", k = None, degree = 1))]
#[allow(clippy::too_many_arguments)]
fn bootstrap(
    py: Python<'_>,
    ds: &PyDataset,
    num_matches: usize,
    replicates: usize,
    alpha: f64,
    seed: u64,
    method: &str,
    kind: &str,
    k: Option<usize>,
    degree: usize,
) -> PyResult<Py<PyAny>> {
    let report = run_estimate(ds, num_matches, method, None, kind, k, degree)?;
    let (bd, ci) = py.detach(|| {
        let bd = bootstrap_from_report(&report, replicates, seed, &GaussianMultipliers { seed })?;
        let ci = bootstrap_ci(&bd, report.tau_hat_bc, alpha)?;
        Ok::<_, Error>((bd, ci))
    })
    .map_err(to_py_err)?;
    to_python(
        py,
        &serde_json::json!({
            "tau_hat_bc": report.tau_hat_bc,
            "ci": ci,
            "conditional_sd": bd.conditional_sd,
            "replicates": bd.replicates,
        }),
    )
}

/// Evaluate one bound family; keyword arguments fill the remaining inputs.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (mode, n, num_matches, eta, p = 1.0, dim = 1, **kwargs))]
fn bounds(
    py: Python<'_>,
    mode: &str,
    n: f64,
    num_matches: f64,
    eta: f64,
    p: f64,
    dim: usize,
    kwargs: Option<&Bound<'_, pyo3::types::PyDict>>,
) -> PyResult<Py<PyAny>> {
    let mode: BoundMode = mode.parse().map_err(to_py_err)?;
    let mut bi = BoundInputs::new(n, num_matches, eta, p, dim);
    if let Some(kw) = kwargs {
        for (key, value) in kw.iter() {
            let key: String = key.extract()?;
            match key.as_str() {
                "m_prime" => bi.m_prime = value.extract()?,
                "r0" => bi.r0 = value.extract()?,
                "gamma" => bi.gamma = value.extract()?,
                "phi_modulus" => bi.phi_modulus = value.extract()?,
                "phi_sup_pow" => bi.phi_sup_pow = value.extract()?,
                "m_l" => bi.m_l = value.extract()?,
                "m_u_p" => bi.m_u_p = value.extract()?,
                "e1" => bi.e1 = value.extract()?,
                "e2" => bi.e2 = value.extract()?,
                other => return Err(PyValueError::new_err(format!("unknown bound input {other:?}"))),
            }
        }
    }
    let report = match mode {
        BoundMode::Covariate => eval_covariate_bound(&bi),
        BoundMode::CovariateSimplified => eval_covariate_bound_simplified(&bi),
        BoundMode::Rank => eval_rank_bound(&bi),
        BoundMode::Cdf => eval_cdf_rank_bound(&bi),
        BoundMode::Bootstrap => eval_bootstrap_bound(&bi, BootstrapTarget::Covariate),
        BoundMode::BootstrapRank => eval_bootstrap_bound(&bi, BootstrapTarget::Rank),
    }
    .map_err(to_py_err)?;
    to_python(py, &report)
}

#[pyfunction]
#[pyo3(signature = (n, p = 1.0))]
fn optimal_matches(n: u64, p: f64) -> PyResult<u64> {
    optimal_m_dim1(n, p).map_err(to_py_err)
}

/// Draw `n` units from a built-in process.
#[pyfunction]
#[pyo3(signature = (dgp, n, seed = 0))]
fn generate(dgp: &str, n: usize, seed: u64) -> PyResult<PyDataset> {
    let dgp = Dgp::builtin(dgp).map_err(to_py_err)?;
    Ok(PyDataset {
        inner: ate_match_core::simlab::generate(&dgp, n, seed).map_err(to_py_err)?,
    })
}

/// `(tau, sigma2, variance_floor)` of a built-in process.
#[pyfunction]
fn population(dgp: &str) -> PyResult<(f64, f64, f64)> {
    let p = Dgp::builtin(dgp).map_err(to_py_err)?.population();
    Ok((p.tau, p.sigma2, p.variance_floor))
}

#[pyfunction]
fn kolmogorov_distance(sample: Vec<f64>, mean: f64, sd: f64) -> PyResult<f64> {
    ks_distance(&sample, mean, sd).map_err(to_py_err)
}

#[pymodule]
fn ate_match(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("AteMatchError", m.py().get_type::<AteMatchError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyMatchResult>()?;
    m.add_class::<PyRegressor>()?;
    m.add_function(wrap_pyfunction!(match_mnn, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_matches, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(population, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_distance, m)?)?;
    Ok(())
}
