pub mod baselines;
pub mod cli;
pub mod covariance;
pub mod deflation;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod linalg;
pub mod model;
pub mod projections;
pub mod rng;
