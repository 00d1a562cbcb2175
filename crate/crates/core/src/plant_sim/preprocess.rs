use crate::error::{Error, Result};
use crate::estimation::TimeSeries;
use crate::plant_sim::RawRecording;

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub aux_power: f64,
    pub p_max: f64,
    /// Power is clipped to `p_max` this long after each start, s.
    pub clip_window: f64,
    /// Output sample period, s.
    pub output_d: f64,
}

impl PreprocessConfig {
    pub fn new(output_d: f64) -> Self {
        PreprocessConfig {
            aux_power: 2.0,
            p_max: 68.0,
            clip_window: 10.0,
            output_d,
        }
    }
}

/// Streaming power cleanup: aux removal and start-up clipping.
#[derive(Clone, Debug)]
pub struct PowerCleaner {
    aux_power: f64,
    p_max: f64,
    clip_window: f64,
    was_on: bool,
    on_since: f64,
}

impl PowerCleaner {
    pub fn new(cfg: &PreprocessConfig) -> Self {
        PowerCleaner {
            aux_power: cfg.aux_power,
            p_max: cfg.p_max,
            clip_window: cfg.clip_window,
            was_on: false,
            on_since: f64::NEG_INFINITY,
        }
    }

    /// Compressor power for the raw sample `p` recorded at `t`.
    pub fn clean(&mut self, t: f64, p: f64) -> f64 {
        let net = (p - self.aux_power).max(0.0);
        let on = net > 0.5 * self.p_max;
        if on && !self.was_on {
            self.on_since = t;
        }
        self.was_on = on;
        if on && t - self.on_since < self.clip_window {
            net.min(self.p_max)
        } else {
            net
        }
    }
}

/// Raw per-second recording to a uniformly sampled [`TimeSeries`].
///
/// Removes the auxiliary load, clips start-up spikes, averages the two
/// thermistors and block-averages every column to `output_d`. Power and room
/// temperature rows average `[t, t + d)`; the freezer temperature averages
/// `[t - d/2, t + d/2)`. Blocks cut by either end are averaged over the rows
/// they have.
pub fn preprocess(raw: &RawRecording, cfg: &PreprocessConfig) -> Result<TimeSeries> {
    raw.validate()?;
    if raw.len() < 2 {
        return Err(Error::validation("recording", "needs at least two rows"));
    }
    let step = raw.t[1] - raw.t[0];
    let ratio = cfg.output_d / step;
    if !(ratio >= 1.0 && (ratio - ratio.round()).abs() < 1e-9) {
        return Err(Error::validation(
            "output_d",
            format!("{} s is not a multiple of the {step} s recording step", cfg.output_d),
        ));
    }
    let block = ratio.round() as usize;

    let mut cleaner = PowerCleaner::new(cfg);
    let power: Vec<f64> = raw.t.iter().zip(&raw.p).map(|(&t, &p)| cleaner.clean(t, p)).collect();
    let temp: Vec<f64> = raw.t1.iter().zip(&raw.t2).map(|(a, b)| 0.5 * (a + b)).collect();

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let half = block / 2;
    let (mut t, mut p, mut t_r, mut y) = (vec![], vec![], vec![], vec![]);
    for start in (0..raw.len()).step_by(block) {
        let end = (start + block).min(raw.len());
        t.push(raw.t[start]);
        p.push(mean(&power[start..end]));
        t_r.push(mean(&raw.t_r[start..end]));
        // Temperature is a sampled state, so its block is centred on the
        // sample instant; inputs hold over the following block.
        let from = start.saturating_sub(half);
        let to = (start + block - half).min(raw.len());
        y.push(mean(&temp[from..to]));
    }
    TimeSeries::new(t, p, t_r, y)
}
