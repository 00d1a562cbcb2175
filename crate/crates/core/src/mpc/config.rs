use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MpcConfig {
    /// Control period, s.
    pub d: f64,
    /// Prediction horizon, steps.
    pub horizon: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub p_max: f64,
    /// Slack weight; `None` means 10³ × the largest price seen by the solver.
    pub slack_weight: Option<f64>,
    /// Shortest PWM on or off pulse, s.
    pub min_pulse: f64,
    /// Mirror every second PWM period so its pulse sits at the end.
    pub flip: bool,
    /// Seconds the previous switch state persists at the start of each period.
    pub solve_delay: f64,
    /// Sequential-linearization limits for the Carnot model.
    pub max_linearizations: usize,
    pub linearization_tol: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            d: 120.0,
            horizon: 270,
            t_min: -27.0,
            t_max: -18.0,
            p_max: 68.0,
            slack_weight: None,
            min_pulse: 10.0,
            flip: true,
            solve_delay: 0.0,
            max_linearizations: 10,
            linearization_tol: 0.01,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d >= 1.0 && self.d.fract() == 0.0) {
            return Err(Error::validation("d", "control period must be a whole number of seconds >= 1"));
        }
        if self.horizon < 1 {
            return Err(Error::validation("horizon", "must be >= 1"));
        }
        if !(self.t_min < self.t_max) {
            return Err(Error::validation("T_min", format!("{} must be below T_max {}", self.t_min, self.t_max)));
        }
        if !(self.p_max > 0.0) {
            return Err(Error::validation("P_max", "must be > 0"));
        }
        if !(self.min_pulse >= 0.0 && 2.0 * self.min_pulse < self.d) {
            return Err(Error::validation("min_pulse", "must be >= 0 and below half the period"));
        }
        if !(self.solve_delay >= 0.0 && self.solve_delay < self.d) {
            return Err(Error::validation("solve_delay", "must lie in [0, d)"));
        }
        if !(self.linearization_tol > 0.0) || self.max_linearizations < 1 {
            return Err(Error::validation("linearization", "need tolerance > 0 and at least one iteration"));
        }
        if let Some(b) = self.slack_weight {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::validation("slack_weight", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Slack weight for a price window.
    pub fn slack_weight_for(&self, prices: &[f64]) -> f64 {
        self.slack_weight
            .unwrap_or_else(|| 1e3 * prices.iter().fold(1e-3f64, |m, &p| m.max(p)))
    }
}

/// Step-constant price: `values[i]` holds from `times[i]` until the next breakpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct PricingSignal {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PricingSignal {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::validation("price", "need matching, non-empty time and value columns"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("price", "times must be strictly increasing"));
        }
        if let Some(k) = values.iter().position(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::validation("price", format!("negative or non-finite price at row {k}")));
        }
        Ok(PricingSignal { times, values })
    }

    pub fn constant(price: f64) -> Self {
        PricingSignal {
            times: vec![0.0],
            values: vec![price],
        }
    }

    /// `low` until `t_step`, then `high`.
    pub fn step(low: f64, high: f64, t_step: f64) -> Self {
        PricingSignal {
            times: vec![0.0, t_step],
            values: vec![low, high],
        }
    }

    /// Price at `t`; before the first breakpoint the first value holds, after
    /// the last one the last value persists.
    pub fn at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s <= t + 1e-9);
        self.values[idx.saturating_sub(1)]
    }

    /// Prices for `n` periods of length `d` starting at `t0`.
    pub fn window(&self, t0: f64, d: f64, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.at(t0 + j as f64 * d)).collect()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// Price 10 → 50 at 11 760 s (period 98 of a 6 h run at d = 120 s).
pub fn paper_price_step() -> PricingSignal {
    PricingSignal::step(10.0, 50.0, 11_760.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn price_lookup_and_persistence() {
        let p = paper_price_step();
        assert_eq!(p.at(0.0), 10.0);
        assert_eq!(p.at(11_759.0), 10.0);
        assert_eq!(p.at(11_760.0), 50.0);
        assert_eq!(p.at(1e9), 50.0);
        let w = p.window(11_520.0, 120.0, 4);
        assert_eq!(w, vec![10.0, 10.0, 50.0, 50.0]);
        assert!((11_760.0f64 / 3600.0 - 3.2667).abs() < 1e-4);
        assert!(PricingSignal::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(PricingSignal::new(vec![0.0], vec![-1.0]).is_err());
    }

    #[test]
    fn config_checks() {
        let cfg = MpcConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.slack_weight_for(&[10.0, 50.0]), 5e4);
        assert!(MpcConfig { t_min: -10.0, ..cfg.clone() }.validate().is_err());
        assert!(MpcConfig { solve_delay: 200.0, ..cfg.clone() }.validate().is_err());
        assert!(MpcConfig { horizon: 0, ..cfg }.validate().is_err());
    }
}
