//! Nearest-neighbor matching estimators of the average treatment effect.
//!
//! The crate is organised around the observed sample (`data`), the
//! opposite-arm neighbor search (`matching`), outcome regressions used for
//! bias correction (`regress`), the covariate, rank and transformed-coordinate
//! estimators (`estimators`), multiplier-bootstrap inference (`inference`),
//! closed-form rate bounds (`bounds`) and a Monte Carlo lab (`simlab`).

pub mod bounds;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod matching;
pub mod numeric;
pub mod regress;
pub mod rng;
pub mod simlab;

pub use data::{Dataset, TreatmentSplit};
pub use error::{Error, Result};
pub use estimators::{EstimateReport, Method, RankTransform};
pub use inference::{BootstrapDistribution, ConfidenceIntervals, VarianceReport};
pub use matching::MatchResult;
pub use regress::{RegressorKind, RegressorPair, RegressorSpec};
