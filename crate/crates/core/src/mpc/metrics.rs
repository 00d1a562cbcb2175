use serde::Serialize;

use crate::error::{Error, Result};
use crate::mpc::{count_transitions, MpcConfig, MpcTrace, TraceRow};
use crate::plant_sim::{preprocess_config_for, PlantConfig, PowerCleaner, RawRecording};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    /// Price-weighted actuated power plus the violation penalty, summed over periods.
    pub m0: f64,
    /// Shifted electricity, Wh.
    #[serde(rename = "m1_Wh")]
    pub m1_wh: f64,
    /// The coast had not ended when the trace did.
    pub m1_truncated: bool,
    /// Mean upper-bound violation, °C.
    #[serde(rename = "m2_C")]
    pub m2: f64,
    /// Largest upper-bound violation, °C.
    #[serde(rename = "m3_C")]
    pub m3: f64,
    pub round_trip: f64,
    pub transitions: usize,
    /// Extra consumption before the price step relative to the baseline, Wh.
    pub invested_wh: f64,
    /// Consumption avoided during the coast relative to the baseline, Wh.
    pub harvested_wh: f64,
    /// Mean baseline compressor power, W.
    pub baseline_power: f64,
    /// Index of the first period at the raised price.
    pub step_index: Option<usize>,
    pub solve_ms_mean: f64,
    pub solve_ms_max: f64,
}

/// Upper-bound violations of measured temperatures, strictly above `t_max`.
pub fn violations(rows: &[TraceRow], t_max: f64) -> Vec<f64> {
    rows.iter().map(|r| if r.t_meas > t_max { r.t_meas - t_max } else { 0.0 }).collect()
}

/// Mean cleaned compressor power of a raw recording, W.
pub fn mean_power(raw: &RawRecording, plant: &PlantConfig) -> Result<f64> {
    if raw.is_empty() {
        return Err(Error::validation("baseline", "empty recording"));
    }
    let mut cleaner = PowerCleaner::new(&preprocess_config_for(plant, 1.0));
    Ok(raw.t.iter().zip(&raw.p).map(|(&t, &p)| cleaner.clean(t, p)).sum::<f64>() / raw.len() as f64)
}

/// Experiment metrics of a closed-loop trace against a baseline mean power.
///
/// The price step is the first period whose price exceeds its predecessor's;
/// the coast runs from there until the measured temperature first reaches
/// `T_max`.  Without a step, `m1` and the round trip are zero.
pub fn metrics(trace: &MpcTrace, baseline_power: f64, cfg: &MpcConfig) -> Result<RunMetrics> {
    let rows = &trace.rows;
    if rows.is_empty() {
        return Err(Error::validation("trace", "no periods recorded"));
    }
    let d = trace.d;
    let prices: Vec<f64> = rows.iter().map(|r| r.price).collect();
    let b = cfg.slack_weight_for(&prices);
    let v = violations(rows, cfg.t_max);
    let m0 = rows.iter().zip(&v).map(|(r, vk)| r.p_actuated * r.price + b * vk).sum();
    let m2 = v.iter().sum::<f64>() / v.len() as f64;
    let m3 = v.iter().fold(0.0, |m: f64, &x| m.max(x));

    let step_index = (1..rows.len()).find(|&k| rows[k].price > rows[k - 1].price);
    let (mut m1_wh, mut m1_truncated, mut invested, mut harvested) = (0.0, false, 0.0, 0.0);
    if let Some(ks) = step_index {
        let end = (ks..rows.len()).find(|&k| rows[k].t_meas >= cfg.t_max);
        m1_truncated = end.is_none();
        let end = end.unwrap_or(rows.len());
        m1_wh = cfg.p_max * (end - ks) as f64 * d / 3600.0;
        invested = rows[..ks].iter().map(|r| (r.p_actuated - baseline_power) * d / 3600.0).sum();
        harvested = rows[ks..end].iter().map(|r| (baseline_power - r.p_actuated) * d / 3600.0).sum();
    }
    let round_trip = if invested > 0.0 { (harvested / invested).clamp(0.0, 1.0) } else { 0.0 };
    let solve: Vec<f64> = rows.iter().map(|r| r.solve_ms).collect();
    Ok(RunMetrics {
        m0,
        m1_wh,
        m1_truncated,
        m2,
        m3,
        round_trip,
        transitions: count_transitions(&trace.switch.on),
        invested_wh: invested,
        harvested_wh: harvested,
        baseline_power,
        step_index,
        solve_ms_mean: solve.iter().sum::<f64>() / solve.len() as f64,
        solve_ms_max: solve.iter().fold(0.0, |m: f64, &x| m.max(x)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: usize, price: f64, p: f64, t: f64) -> TraceRow {
        TraceRow {
            t: k as f64 * 120.0,
            price,
            p_setpoint: p,
            p_actuated: p,
            t_meas: t,
            t_pred: t,
            slack: 0.0,
            solve_ms: 0.0,
        }
    }

    fn trace(rows: Vec<TraceRow>) -> MpcTrace {
        MpcTrace {
            d: 120.0,
            rows,
            ..Default::default()
        }
    }

    #[test]
    fn no_violation_means_zero_m2_m3() {
        let t = trace((0..50).map(|k| row(k, 10.0, 30.0, -18.0)).collect());
        let m = metrics(&t, 30.0, &MpcConfig::default()).unwrap();
        assert_eq!((m.m2, m.m3), (0.0, 0.0));
        assert_eq!(m.step_index, None);
        assert_eq!(m.m1_wh, 0.0);
    }

    #[test]
    fn single_violation() {
        let mut rows: Vec<TraceRow> = (0..180).map(|k| row(k, 10.0, 30.0, -20.0)).collect();
        rows[77].t_meas = -17.5;
        let m = metrics(&trace(rows), 30.0, &MpcConfig::default()).unwrap();
        assert!((m.m2 - 0.5 / 180.0).abs() < 1e-15);
        assert_eq!(m.m3, 0.5);
        assert!(m.m2 <= m.m3);
    }

    #[test]
    fn shift_and_round_trip() {
        // 10 periods pre-cooling at 50 W above a 20 W baseline, then 20 periods
        // off before the temperature reaches the bound.
        let mut rows = vec![];
        for k in 0..10 {
            rows.push(row(k, 10.0, 70.0, -20.0 - k as f64 * 0.5));
        }
        for k in 10..30 {
            rows.push(row(k, 50.0, 0.0, -25.0 + (k - 10) as f64 * 0.3));
        }
        for k in 30..50 {
            rows.push(row(k, 50.0, 20.0, -18.0));
        }
        let m = metrics(&trace(rows), 20.0, &MpcConfig::default()).unwrap();
        assert_eq!(m.step_index, Some(10));
        assert!(!m.m1_truncated);
        assert!((m.m1_wh - 68.0 * 20.0 * 120.0 / 3600.0).abs() < 1e-9);
        let invested = 10.0 * 50.0 * 120.0 / 3600.0;
        let harvested = 20.0 * 20.0 * 120.0 / 3600.0;
        assert!((m.round_trip - harvested / invested).abs() < 1e-12);
    }

    #[test]
    fn coast_past_trace_end_is_flagged() {
        let mut rows: Vec<TraceRow> = (0..5).map(|k| row(k, 10.0, 68.0, -26.0)).collect();
        rows.extend((5..20).map(|k| row(k, 50.0, 0.0, -25.0)));
        let m = metrics(&trace(rows), 20.0, &MpcConfig::default()).unwrap();
        assert!(m.m1_truncated);
        assert!((m.m1_wh - 68.0 * 15.0 * 120.0 / 3600.0).abs() < 1e-9);
    }
}
