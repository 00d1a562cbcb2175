use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PrbsConfig {
    /// Length of one PRBS cycle, s.
    pub base_period: f64,
    pub duration: f64,
    /// Shortest on or off run kept, s.
    pub min_pulse: f64,
    pub seed: u64,
}

impl PrbsConfig {
    pub fn new(base_period: f64, duration: f64, seed: u64) -> Self {
        PrbsConfig {
            base_period,
            duration,
            min_pulse: 30.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let whole = |x: f64| x > 0.0 && x.fract() == 0.0;
        if !whole(self.base_period) {
            return Err(Error::validation("base_period", "must be a positive whole number of seconds"));
        }
        if !(self.min_pulse >= 0.0 && self.min_pulse.is_finite()) {
            return Err(Error::validation("min_pulse", "must be >= 0"));
        }
        if self.min_pulse >= self.base_period {
            return Err(Error::validation(
                "min_pulse",
                format!("{} s must be shorter than the base period {} s", self.min_pulse, self.base_period),
            ));
        }
        if !(self.duration >= 10.0 * self.base_period && self.duration.is_finite()) {
            return Err(Error::validation("duration", "must cover at least ten base periods"));
        }
        Ok(())
    }
}

/// On/off switch sampled once per second.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SwitchSignal {
    pub on: Vec<bool>,
}

impl SwitchSignal {
    pub fn constant(on: bool, seconds: usize) -> Self {
        SwitchSignal { on: vec![on; seconds] }
    }

    pub fn len(&self) -> usize {
        self.on.len()
    }

    pub fn is_empty(&self) -> bool {
        self.on.is_empty()
    }

    pub fn duty(&self) -> f64 {
        self.on.iter().filter(|&&b| b).count() as f64 / self.on.len().max(1) as f64
    }

    /// Maximal constant runs as `(value, length)`.
    pub fn runs(&self) -> Vec<(bool, usize)> {
        let mut out: Vec<(bool, usize)> = vec![];
        for &b in &self.on {
            match out.last_mut() {
                Some((v, n)) if *v == b => *n += 1,
                _ => out.push((b, 1)),
            }
        }
        out
    }
}

/// Random-duty PRBS: each base period starts with an on phase whose length is
/// a uniform fraction of the period, rounded to whole seconds.
///
/// Runs shorter than `min_pulse` are absorbed by the run before them (the
/// first run by the one after it), so no two transitions are closer than
/// `min_pulse`.
pub fn prbs_generate(cfg: &PrbsConfig) -> Result<SwitchSignal> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let period = cfg.base_period as usize;
    let total = cfg.duration.floor() as usize;
    let mut on = Vec::with_capacity(total + period);
    while on.len() < total {
        let duty: f64 = rng.random();
        let on_len = (duty * period as f64).round() as usize;
        on.extend(std::iter::repeat_n(true, on_len));
        on.extend(std::iter::repeat_n(false, period - on_len));
    }
    on.truncate(total);

    let min = cfg.min_pulse.ceil() as usize;
    let mut merged: Vec<(bool, usize)> = vec![];
    let mut carry = 0usize;
    for (value, len) in (SwitchSignal { on }).runs() {
        match merged.last_mut() {
            Some((v, n)) if *v == value => *n += len,
            Some((_, n)) if len < min => *n += len,
            None if len < min => carry += len,
            _ => merged.push((value, len + std::mem::take(&mut carry))),
        }
    }
    if carry > 0 {
        // Everything was shorter than min_pulse; keep a single off run.
        merged.push((false, carry));
    }
    let mut out = Vec::with_capacity(total);
    for (value, len) in merged {
        out.extend(std::iter::repeat_n(value, len));
    }
    Ok(SwitchSignal { on: out })
}
