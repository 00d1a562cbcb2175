use crate::error::{Error, Result};
use crate::estimation::kalman::{run_filter, FilterOptions, Record};
use crate::estimation::TimeSeries;
use crate::thermal_models::{discretize_params, ThermalParameters};

#[derive(Clone, Debug, PartialEq)]
pub struct KStepScore {
    pub horizon_steps: usize,
    /// Mean of measured minus predicted, °C.
    pub mean: f64,
    /// Sample standard deviation, °C.
    pub std: f64,
    pub residuals: Vec<f64>,
}

/// Number of samples covering `minutes` at period `d`, rounded, at least one.
pub fn horizon_for(minutes: f64, d: f64) -> usize {
    ((minutes * 60.0 / d).round() as usize).max(1)
}

/// Open-loop `h`-step-ahead prediction errors.
///
/// For every `k` the filter estimate `x̂_{k|k}` is propagated through the
/// model with the measured inputs and no updates; the residual is
/// `y_{k+h} − ŷ_{k+h|k}`.
pub fn k_step_residuals(
    params: &ThermalParameters,
    data: &TimeSeries,
    horizon_steps: usize,
    opts: &FilterOptions,
) -> Result<KStepScore> {
    if horizon_steps < 1 {
        return Err(Error::validation("horizon_steps", "must be >= 1"));
    }
    data.validate()?;
    if horizon_steps > data.steps() {
        return Err(Error::validation(
            "horizon_steps",
            format!("{horizon_steps} exceeds the {} available steps", data.steps()),
        ));
    }
    let dss = discretize_params(params, data.d())?;
    let trace = run_filter(&dss, data, opts, Record::Everything).map_err(Error::Numerical)?;
    let h = horizon_steps;
    let mut residuals = Vec::with_capacity(data.len() - h);
    for k in 0..data.len() - h {
        let mut x = trace.states[k].clone();
        for j in k..k + h {
            x = dss.step_mean(&x, data.t_r[j], data.p[j])?;
        }
        residuals.push(data.y[k + h] - dss.output(&x));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let std = if residuals.len() > 1 {
        (residuals.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(KStepScore {
        horizon_steps: h,
        mean,
        std,
        residuals,
    })
}
