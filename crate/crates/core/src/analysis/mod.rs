//! Downstream statistics on the metric series.

mod beta_regression;
mod correlation;
mod optimize;
mod sensitivity;

pub use beta_regression::{
    beta_log_likelihood, beta_log_likelihood_gradient, fit_beta_regression, logistic, logit, BetaRegressionFit,
    ConstantFit, RESPONSE_CLAMP,
};
pub use correlation::{
    correlate, metric_series, pearson, penetration, CorrelationResult, MetricKind, PenetrationRecord,
};
pub use sensitivity::{sensitivity_sweep, SensitivityGrid, SensitivityRow};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalysisError {
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("population must be positive, got {0}")]
    NonPositivePopulation(f64),
    #[error("empty analysis period")]
    EmptyPeriod,
    #[error("beta regression needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid regression input: {0}")]
    InvalidInput(String),
    #[error("beta regression did not converge after {iterations} iterations (log-likelihood {log_likelihood}, gradient norm {gradient_norm})")]
    FitFailed { iterations: usize, log_likelihood: f64, gradient_norm: f64 },
}
