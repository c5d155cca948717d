//! Measurements on fields and series: norms, rate fits, predicted
//! exponents, Poincaré constants.

mod exponents;
mod fit;
mod poincare;
mod series;

use thiserror::Error;

pub use exponents::{
    detect_t_star, envelope_ratio, moser_p, moser_p_recurrence, predict_rates, theta, RatePrediction,
};
pub use fit::{
    fit_exp_rate, fit_exponential, fit_power_law, fit_power_rate, least_squares, window_where, ExpFit, LineFit,
    MIN_FIT_POINTS,
};
pub use poincare::{poincare_constant_box, poincare_constant_numeric, smallest_nonzero_eigenvalue};
pub use series::{lp_norm, Provenance, Quantity, Record, TimeSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("norm exponent must be positive (got {0})")]
    InvalidExponent(f64),
    #[error("theta({s}, {r}, {dim}) outside the admissible parameter range")]
    ThetaDomain { s: f64, r: f64, dim: usize },
    #[error("need at least 5 records in window [{}, {}], found {got}", window.0, window.1)]
    TooFewPoints { got: usize, window: (f64, f64) },
    #[error("fit requires positive values (found {0})")]
    NonPositive(f64),
    #[error("record times must increase strictly ({prev} then {next})")]
    NonIncreasingTime { prev: f64, next: f64 },
    #[error("non-finite entry in record at t={0}")]
    NonFinite(f64),
    #[error("eigenvalue iteration did not converge in {0} iterations")]
    NoConvergence(usize),
}
