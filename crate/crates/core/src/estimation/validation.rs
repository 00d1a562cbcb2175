use crate::error::{Error, Result};
use crate::stats::chi2_sf;
use crate::thermal_models::ModelKind;

/// Default confidence level of the deviance test.
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub struct Acf {
    /// `rho[l]` for lags `0..=max_lag`.
    pub rho: Vec<f64>,
    pub log10_abs: Vec<f64>,
}

impl Acf {
    /// Fraction of lags `1..=max_lag` whose `|rho|` exceeds `threshold`.
    pub fn fraction_above(&self, threshold: f64) -> f64 {
        let lags = &self.rho[1..];
        if lags.is_empty() {
            return 0.0;
        }
        lags.iter().filter(|r| r.abs() > threshold).count() as f64 / lags.len() as f64
    }
}

/// Sample autocorrelation of `residuals` up to `max_lag`.
pub fn residual_acf(residuals: &[f64], max_lag: usize) -> Result<Acf> {
    let n = residuals.len();
    if max_lag >= n {
        return Err(Error::validation("max_lag", format!("must be < N = {n}, got {max_lag}")));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = residuals.iter().map(|e| e - mean).collect();
    let denom: f64 = dev.iter().map(|e| e * e).sum();
    if !(denom > 0.0) {
        return Err(Error::Numerical("residual sequence has zero variance".into()));
    }
    let rho: Vec<f64> = (0..=max_lag)
        .map(|l| {
            if l == 0 {
                1.0
            } else {
                dev[..n - l].iter().zip(&dev[l..]).map(|(a, b)| a * b).sum::<f64>() / denom
            }
        })
        .collect();
    let log10_abs = rho.iter().map(|r| r.abs().log10()).collect();
    Ok(Acf { rho, log10_abs })
}

/// Asymptotic 95% band `1.96/√N` for the ACF of a white sequence.
pub fn whiteness_threshold(n: usize) -> f64 {
    1.96 / (n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DevianceResult {
    pub deviance: f64,
    pub df: u32,
    pub p_value: f64,
    pub reject_null: bool,
    /// The larger model fitted worse than the smaller one.
    pub nesting_warning: bool,
}

/// Likelihood-ratio test of a small model nested in a big one at 95%.
pub fn deviance_test(loglik_small: f64, loglik_big: f64, df: u32) -> Result<DevianceResult> {
    deviance_test_at(loglik_small, loglik_big, df, DEFAULT_CONFIDENCE)
}

pub fn deviance_test_at(loglik_small: f64, loglik_big: f64, df: u32, confidence: f64) -> Result<DevianceResult> {
    if df < 1 {
        return Err(Error::validation("df", "degrees of freedom must be >= 1"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::validation("confidence", "must lie in (0, 1)"));
    }
    if !(loglik_small.is_finite() && loglik_big.is_finite()) {
        return Err(Error::validation("loglik", "log-likelihoods must be finite"));
    }
    let deviance = 2.0 * (loglik_big - loglik_small);
    let (p_value, nesting_warning) = if deviance < 0.0 {
        (1.0, true)
    } else {
        (chi2_sf(deviance, df)?, false)
    };
    Ok(DevianceResult {
        deviance,
        df,
        p_value,
        reject_null: p_value < 1.0 - confidence,
        nesting_warning,
    })
}

/// Parameter-count difference, the default degrees of freedom.
pub fn default_df(small: ModelKind, big: ModelKind) -> Result<u32> {
    let (s, b) = (small.parameter_count(), big.parameter_count());
    if b <= s {
        return Err(Error::validation(
            "df",
            format!("model {big} ({b} parameters) does not extend model {small} ({s})"),
        ));
    }
    Ok((b - s) as u32)
}
