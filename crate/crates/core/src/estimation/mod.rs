//! Innovations likelihood, maximum-likelihood fitting and model validation.

mod fit;
mod kalman;
mod likelihood;
mod predict;
mod series;
mod validation;

pub use fit::{mle_fit, Bounds, FitOptions, FitResult, StartDiagnostics};
pub use kalman::{ekf_step, kf_step, FilterOptions, KalmanBelief, KalmanStep, MIN_INNOVATION_VARIANCE};
pub use likelihood::{innovations_loglik, innovations_loglik_dss, innovations_loglik_with, Innovations, LOGLIK_FAILURE};
pub use predict::{horizon_for, k_step_residuals, KStepScore};
pub use series::TimeSeries;
pub use validation::{
    default_df, deviance_test, deviance_test_at, residual_acf, whiteness_threshold, Acf, DevianceResult,
    DEFAULT_CONFIDENCE,
};

pub use crate::stats::chi2_cdf;
