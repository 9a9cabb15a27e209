//! Data-generating processes and Monte Carlo experiments.

pub mod dgp;
pub mod experiments;
pub mod quadrature;

pub use dgp::{generate, Dgp, Population, BUILTIN_DGPS};
pub use experiments::{
    mc_coverage, mc_density_ratio, mc_kolmogorov, mc_radius_tail, mc_variance, radius_tail_bound,
    McCell, McReport, Regression,
};
