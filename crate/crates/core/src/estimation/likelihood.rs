use crate::error::{Error, Result};
use crate::estimation::kalman::{run_filter, FilterOptions, Record};
use crate::estimation::TimeSeries;
use crate::thermal_models::{discretize_params, DiscreteStateSpace, ThermalParameters};

/// Log-likelihood reported when the filter breaks down.
pub const LOGLIK_FAILURE: f64 = -1e300;

#[derive(Clone, Debug, PartialEq)]
pub struct Innovations {
    pub loglik: f64,
    pub residuals: Vec<f64>,
    pub variances: Vec<f64>,
    /// Set when the filter failed and `loglik` is [`LOGLIK_FAILURE`].
    pub failure: Option<String>,
}

impl Innovations {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    fn failure(reason: String) -> Self {
        Innovations {
            loglik: LOGLIK_FAILURE,
            residuals: vec![],
            variances: vec![],
            failure: Some(reason),
        }
    }
}

/// Gaussian innovations log-likelihood of `data` under `params`.
///
/// The filter starts with every state at the first measurement; the sum runs
/// over the `N` one-step predictions that follow. Numerical breakdown is not
/// an error: it yields [`LOGLIK_FAILURE`] with a diagnostic.
pub fn innovations_loglik(params: &ThermalParameters, data: &TimeSeries) -> Result<Innovations> {
    innovations_loglik_with(params, data, &FilterOptions::default())
}

pub fn innovations_loglik_with(
    params: &ThermalParameters,
    data: &TimeSeries,
    opts: &FilterOptions,
) -> Result<Innovations> {
    params.validate()?;
    data.validate()?;
    match discretize_params(params, data.d()) {
        Ok(dss) => Ok(loglik_dss(&dss, data, opts, true)),
        Err(e @ Error::UnstableDiscretization { .. }) => Ok(Innovations::failure(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Same as [`innovations_loglik_with`] for an already discretized model.
pub fn innovations_loglik_dss(
    dss: &DiscreteStateSpace,
    data: &TimeSeries,
    opts: &FilterOptions,
) -> Result<Innovations> {
    data.validate()?;
    if (dss.d - data.d()).abs() > 1e-9 * dss.d {
        return Err(Error::validation(
            "d",
            format!("model period {} s differs from data period {} s", dss.d, data.d()),
        ));
    }
    Ok(loglik_dss(dss, data, opts, true))
}

/// Log-likelihood only; used inside the optimizer.
pub(crate) fn loglik_value(params: &ThermalParameters, data: &TimeSeries, opts: &FilterOptions) -> f64 {
    match discretize_params(params, data.d()) {
        Ok(dss) => loglik_dss(&dss, data, opts, false).loglik,
        Err(_) => LOGLIK_FAILURE,
    }
}

fn loglik_dss(dss: &DiscreteStateSpace, data: &TimeSeries, opts: &FilterOptions, keep: bool) -> Innovations {
    let record = if keep { Record::Innovations } else { Record::Nothing };
    match run_filter(dss, data, opts, record) {
        Ok(trace) => Innovations {
            loglik: trace.loglik,
            residuals: trace.innovations,
            variances: trace.variances,
            failure: None,
        },
        Err(reason) => Innovations::failure(reason),
    }
}
