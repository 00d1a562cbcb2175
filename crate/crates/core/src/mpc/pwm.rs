use crate::mpc::MpcConfig;
use crate::plant_sim::SwitchSignal;

/// On-pulse of one control period.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PwmPeriod {
    /// Offset of the pulse from the period start, s.
    pub start: u32,
    /// On-time, s.
    pub duration: u32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PwmSchedule {
    /// Period length, s.
    pub d: u32,
    pub periods: Vec<PwmPeriod>,
}

/// On-pulse for power `p` in period `index` (counted from the run start).
///
/// The duty `p / P_max · d` is rounded to whole seconds, pulses or gaps
/// shorter than `min_pulse` are dropped, and with flipping enabled odd
/// periods put their pulse at the end.
pub fn pwm_translate(p: f64, cfg: &MpcConfig, index: usize) -> PwmPeriod {
    let d = cfg.d;
    let tau = (p / cfg.p_max).clamp(0.0, 1.0) * d;
    let mut tau = tau.round();
    if tau < cfg.min_pulse {
        tau = 0.0;
    } else if d - tau < cfg.min_pulse {
        tau = d;
    }
    let duration = tau as u32;
    let start = if cfg.flip && index % 2 == 1 { (d - tau) as u32 } else { 0 };
    PwmPeriod { start, duration }
}

impl PwmSchedule {
    pub fn from_powers(powers: &[f64], cfg: &MpcConfig) -> Self {
        PwmSchedule {
            d: cfg.d as u32,
            periods: powers.iter().enumerate().map(|(i, &p)| pwm_translate(p, cfg, i)).collect(),
        }
    }

    /// Per-second switch signal.
    pub fn to_switch(&self) -> SwitchSignal {
        let on = self
            .periods
            .iter()
            .flat_map(|pp| (0..self.d).map(move |s| s >= pp.start && s < pp.start + pp.duration))
            .collect();
        SwitchSignal { on }
    }
}

/// Number of off→on and on→off changes between consecutive seconds.
pub fn count_transitions(on: &[bool]) -> usize {
    on.windows(2).filter(|w| w[0] != w[1]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duty_rounding() {
        let cfg = MpcConfig::default();
        assert_eq!(pwm_translate(34.0, &cfg, 0), PwmPeriod { start: 0, duration: 60 });
        assert_eq!(pwm_translate(4.0, &cfg, 0).duration, 0);
        assert_eq!(pwm_translate(66.0, &cfg, 0).duration, 120);
        assert_eq!(pwm_translate(34.0, &cfg, 1), PwmPeriod { start: 60, duration: 60 });
        assert_eq!(pwm_translate(68.0, &cfg, 1), PwmPeriod { start: 0, duration: 120 });
        assert_eq!(pwm_translate(0.0, &cfg, 1).duration, 0);
    }

    #[test]
    fn flip_halves_transitions_at_half_duty() {
        let on = MpcConfig::default();
        let off = MpcConfig { flip: false, ..on.clone() };
        let flipped = PwmSchedule::from_powers(&[34.0, 34.0], &on).to_switch();
        let plain = PwmSchedule::from_powers(&[34.0, 34.0], &off).to_switch();
        assert_eq!(count_transitions(&flipped.on), 2);
        assert_eq!(count_transitions(&plain.on), 3);
        let long = |cfg: &MpcConfig| count_transitions(&PwmSchedule::from_powers(&[34.0; 40], cfg).to_switch().on);
        assert_eq!(long(&on), 40);
        assert_eq!(long(&off), 79);
    }

    #[test]
    fn energy_within_min_pulse() {
        let cfg = MpcConfig::default();
        for k in 0..=680 {
            let p = k as f64 * 0.1;
            let pp = pwm_translate(p, &cfg, k);
            let err = (pp.duration as f64 * cfg.p_max - p * cfg.d).abs();
            assert!(err <= cfg.min_pulse * cfg.p_max + 1e-9, "{p}: {err}");
            assert!(pp.start + pp.duration <= 120);
        }
    }
}
