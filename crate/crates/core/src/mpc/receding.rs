use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimation::{kf_step, KalmanBelief};
use crate::mpc::{build_and_solve_lp, condense, pwm_translate, solve_nonlinear_horizon, MpcConfig, PricingSignal};
use crate::plant_sim::{preprocess_config_for, Plant, PlantConfig, PowerCleaner, RawRecording, SwitchSignal};
use crate::thermal_models::{build_continuous, discretize_params, ModelKind, ThermalParameters};

/// Seconds of thermistor readings averaged into each controller measurement.
pub const MEASUREMENT_WINDOW: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Constant room temperature, °C.
    pub room_temperature: f64,
    /// Diagonal of the initial belief covariance, °C².
    pub initial_variance: f64,
    /// Record wall-clock solve times; otherwise `solve_ms` is 0 and runs are
    /// byte-for-byte reproducible.
    pub record_timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            room_temperature: 23.0,
            initial_variance: 1.0,
            record_timing: false,
        }
    }
}

/// One control period of a closed-loop run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub price: f64,
    /// First planned power, W.
    pub p_setpoint: f64,
    /// Mean cleaned compressor power over the period, W.
    pub p_actuated: f64,
    /// Measurement at the period start, °C.
    pub t_meas: f64,
    /// Planned temperature at the period end, °C.
    pub t_pred: f64,
    pub slack: f64,
    pub solve_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MpcTrace {
    pub d: f64,
    pub rows: Vec<TraceRow>,
    /// Per-second plant record.
    pub raw: RawRecording,
    pub switch: SwitchSignal,
    /// Error that ended the run early; the rows before it are kept.
    pub aborted: Option<String>,
}

fn belief_at(params: &ThermalParameters, t_r: f64, y: f64, p_max: f64, variance: f64) -> KalmanBelief {
    let n = params.kind().state_dim();
    let p = DMatrix::identity(n, n) * variance;
    match build_continuous(params).and_then(|css| css.steady_state_at(t_r, y, p_max)) {
        Ok((x, _)) => KalmanBelief { x, p },
        Err(_) => KalmanBelief::from_measurement(y, n, variance),
    }
}

/// Closed-loop economic MPC against a simulated plant.
///
/// Each period: filter the latest averaged reading, plan over the horizon with
/// a persistent room-temperature forecast, and apply the first set-point by
/// PWM for `d` seconds.  The initial belief is the controller model's
/// equilibrium at the plant's starting temperature.
pub fn receding_horizon_run(
    model: &ThermalParameters,
    plant_cfg: &PlantConfig,
    prices: &PricingSignal,
    cfg: &MpcConfig,
    duration: f64,
    opts: &RunOptions,
) -> Result<MpcTrace> {
    cfg.validate()?;
    let d = cfg.d;
    let periods = (duration / d).round();
    if !(periods >= 1.0 && (duration - periods * d).abs() < 1e-9) {
        return Err(Error::validation("duration", format!("{duration} s is not a positive multiple of d = {d} s")));
    }
    let periods = periods as usize;
    let dss = discretize_params(model, d)?;
    let t_r = opts.room_temperature;
    let mut plant = Plant::new(plant_cfg.clone(), t_r)?;
    let mut cleaner = PowerCleaner::new(&preprocess_config_for(plant_cfg, 1.0));
    let y0 = plant.true_output();
    let mut belief = belief_at(model, t_r, y0, cfg.p_max, opts.initial_variance);

    let mut trace = MpcTrace {
        d,
        ..Default::default()
    };
    let steps = d as usize;
    let n = cfg.horizon;
    let mut prev_on = false;
    let mut last_power = 0.0;
    for i in 0..periods {
        let t = i as f64 * d;
        let outcome = (|| -> Result<TraceRow> {
            let t_meas = if i == 0 {
                y0
            } else {
                let k = trace.raw.len();
                let k0 = k.saturating_sub(MEASUREMENT_WINDOW);
                let y = (k0..k).map(|j| 0.5 * (trace.raw.t1[j] + trace.raw.t2[j])).sum::<f64>() / (k - k0) as f64;
                belief = kf_step(&belief, &dss, [t_r, last_power], y)?.belief;
                y
            };
            let window = prices.window(t, d, n);
            let room = vec![t_r; n];
            let clock = Instant::now();
            let sol = if model.kind() == ModelKind::E {
                solve_nonlinear_horizon(model, &belief.x, cfg, &window, &room)?.solution
            } else {
                build_and_solve_lp(&condense(&dss, &belief.x, n)?, &room, &window, cfg)?
            };
            let solve_ms = if opts.record_timing {
                clock.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            let pulse = pwm_translate(sol.p[0], cfg, i);
            let mut energy = 0.0;
            for s in 0..steps {
                let on = if (s as f64) < cfg.solve_delay {
                    prev_on
                } else {
                    s as u32 >= pulse.start && (s as u32) < pulse.start + pulse.duration
                };
                let row = plant.step(on, t_r)?;
                energy += cleaner.clean(row.t, row.p);
                trace.raw.push(row);
                trace.switch.on.push(on);
                prev_on = on;
            }
            last_power = energy / steps as f64;
            Ok(TraceRow {
                t,
                price: window[0],
                p_setpoint: sol.p[0],
                p_actuated: last_power,
                t_meas,
                t_pred: sol.predicted[0],
                slack: sol.s[0],
                solve_ms,
            })
        })();
        match outcome {
            Ok(row) => trace.rows.push(row),
            Err(e) => {
                trace.aborted = Some(format!("period {i} (t = {t} s): {e}"));
                break;
            }
        }
    }
    Ok(trace)
}
