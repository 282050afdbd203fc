//! Wasserstein distances between the mixing measures of topic-model documents,
//! with debiased mixture-weight estimation and data-driven inference on the
//! distance (plug-in limiting-distribution sampling, bootstrap baselines).

pub mod error;
pub mod estimators;
pub mod inference;
pub mod lp;
pub mod numlin;
pub mod rng;
pub mod selftest;
pub mod simulate;
pub mod transport;

pub use error::{Error, Result};
pub use transport::{CostMatrix, DualPolytope, Metric, ProbVec, TopicMatrix};
