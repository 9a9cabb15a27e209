//! Built-in data-generating processes with uniform covariates on the unit cube.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::quadrature::integrate_unit_cube;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regress::{RegressorPair, SurfaceFn};
use crate::rng::{substream, Purpose};

pub const BUILTIN_DGPS: [&str; 3] = ["linear-1d", "homogeneous", "quadratic-2d"];

/// Population quantities, integrated once per process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Population {
    pub tau: f64,
    /// `Var(mu1 - mu0) + E[s1^2/e + s0^2/(1-e)]`.
    pub sigma2: f64,
    /// `E[s^2] + Var(mu1 - mu0)`.
    pub variance_floor: f64,
}

#[derive(Clone)]
pub struct Dgp {
    pub name: String,
    pub m: usize,
    pub mu0: SurfaceFn,
    pub mu1: SurfaceFn,
    pub propensity: SurfaceFn,
    pub noise_sd: SurfaceFn,
    /// Declared overlap: `eta_star <= e(x) <= 1 - eta_star`.
    pub eta_star: f64,
    /// Lower bound of the covariate density.
    pub g_min: f64,
    population: Population,
}

impl fmt::Debug for Dgp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dgp")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("eta_star", &self.eta_star)
            .field("population", &self.population)
            .finish()
    }
}

fn surface(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> SurfaceFn {
    Arc::new(f)
}

impl Dgp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        m: usize,
        mu0: SurfaceFn,
        mu1: SurfaceFn,
        propensity: SurfaceFn,
        noise_sd: SurfaceFn,
        eta_star: f64,
        g_min: f64,
    ) -> Self {
        let mut dgp = Dgp {
            name: name.to_string(),
            m,
            mu0,
            mu1,
            propensity,
            noise_sd,
            eta_star,
            g_min,
            population: Population {
                tau: 0.0,
                sigma2: 0.0,
                variance_floor: 0.0,
            },
        };
        dgp.population = dgp.integrate();
        dgp
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "linear-1d" => Ok(Self::linear_1d()),
            "homogeneous" => Ok(Self::homogeneous()),
            "quadratic-2d" => Ok(Self::quadratic_2d()),
            other => Err(Error::UnknownDgp(other.to_string())),
        }
    }

    /// `e(x) = 0.3 + 0.4x`, `mu0 = x`, `mu1 = 1 + 2x`, noise variance 0.25.
    pub fn linear_1d() -> Self {
        Self::new(
            "linear-1d",
            1,
            surface(|x| x[0]),
            surface(|x| 1.0 + 2.0 * x[0]),
            surface(|x| 0.3 + 0.4 * x[0]),
            surface(|_| 0.5),
            0.3,
            1.0,
        )
    }

    /// `e = 1/2`, `mu0 = 0`, `mu1 = 1`, unit noise.
    pub fn homogeneous() -> Self {
        Self::new(
            "homogeneous",
            1,
            surface(|_| 0.0),
            surface(|_| 1.0),
            surface(|_| 0.5),
            surface(|_| 1.0),
            0.5,
            1.0,
        )
    }

    /// Two covariates, `e = 0.3 + 0.2(x1 + x2)`, `mu0 = x1^2 + x2`, `mu1 = mu0 + 1 + x1 x2`.
    pub fn quadratic_2d() -> Self {
        Self::new(
            "quadratic-2d",
            2,
            surface(|x| x[0] * x[0] + x[1]),
            surface(|x| x[0] * x[0] + x[1] + 1.0 + x[0] * x[1]),
            surface(|x| 0.3 + 0.2 * (x[0] + x[1])),
            surface(|_| 0.5),
            0.3,
            1.0,
        )
    }

    /// Same process with a constant noise standard deviation.
    pub fn with_noise_sd(&self, sd: f64) -> Self {
        Self::new(
            &self.name,
            self.m,
            self.mu0.clone(),
            self.mu1.clone(),
            self.propensity.clone(),
            surface(move |_| sd),
            self.eta_star,
            self.g_min,
        )
    }

    fn integrate(&self) -> Population {
        let m = self.m;
        let tau = integrate_unit_cube(&|x| (self.mu1)(x) - (self.mu0)(x), m);
        let var_delta = integrate_unit_cube(
            &|x| {
                let c = (self.mu1)(x) - (self.mu0)(x) - tau;
                c * c
            },
            m,
        );
        let weighted = integrate_unit_cube(
            &|x| {
                let s2 = (self.noise_sd)(x).powi(2);
                let e = (self.propensity)(x);
                s2 / e + s2 / (1.0 - e)
            },
            m,
        );
        let noise = integrate_unit_cube(&|x| (self.noise_sd)(x).powi(2), m);
        Population {
            tau,
            sigma2: var_delta + weighted,
            variance_floor: noise + var_delta,
        }
    }

    pub fn population(&self) -> Population {
        self.population
    }

    pub fn tau(&self) -> f64 {
        self.population.tau
    }

    /// Limiting variance, or an error when it is not a usable positive number.
    pub fn sigma2(&self) -> Result<f64> {
        let s = self.population.sigma2;
        if !s.is_finite() || s <= 1e-12 {
            return Err(Error::DegenerateVariance(self.name.clone()));
        }
        Ok(s)
    }

    /// True surfaces as an oracle regressor.
    pub fn oracle(&self) -> RegressorPair {
        RegressorPair::oracle(self.m, self.mu0.clone(), self.mu1.clone())
    }

    /// Replicate `rep` of an `n`-unit sample under root `seed`.
    pub fn generate_rep(&self, n: usize, seed: u64, rep: u64) -> Result<Dataset> {
        if n < 2 {
            return Err(Error::invalid("n", format!("need at least 2 units, got {n}")));
        }
        let m = self.m;
        let mut rng = substream(seed, Purpose::Dataset, rep);
        let mut x = vec![0.0; n * m];
        let mut d = vec![0u8; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = &mut x[i * m..(i + 1) * m];
            for v in row.iter_mut() {
                *v = rng.random::<f64>();
            }
            let u: f64 = rng.random();
            let z: f64 = StandardNormal.sample(&mut rng);
            let row = &x[i * m..(i + 1) * m];
            d[i] = (u < (self.propensity)(row)) as u8;
            let mu = if d[i] == 1 { &self.mu1 } else { &self.mu0 };
            y[i] = mu(row) + (self.noise_sd)(row) * z;
        }
        Dataset::new(m, x, d, y)
    }
}

/// One sample of `n` units from `dgp`, reproducible from `seed`.
pub fn generate(dgp: &Dgp, n: usize, seed: u64) -> Result<Dataset> {
    dgp.generate_rep(n, seed, 0)
}
