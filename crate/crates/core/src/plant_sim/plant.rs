use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::plant_sim::SwitchSignal;
use crate::thermal_models::{build_continuous, discretize, DiscreteStateSpace, ThermalParameters};

/// How the plant state is initialized.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// Every node at the same temperature, °C.
    Uniform(f64),
    /// Equilibrium under a constant mean power `duty · P_max` and the first room temperature.
    Steady { duty: f64 },
    /// Equilibrium whose measured node sits at this temperature, °C.
    SteadyAt(f64),
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantConfig {
    pub params: ThermalParameters,
    /// Compressor electrical power when on, W.
    pub p_max: f64,
    pub aux_power: f64,
    pub inrush_amplitude: f64,
    pub inrush_decay: f64,
    /// The spike is cut after this long, s.
    pub inrush_window: f64,
    /// Standard deviation of each thermistor, °C.
    pub sensor_noise: f64,
    /// Integration step, s.
    pub step: f64,
    pub initial: InitialState,
    pub seed: u64,
}

impl PlantConfig {
    pub fn new(params: ThermalParameters, seed: u64) -> Self {
        PlantConfig {
            params,
            p_max: 68.0,
            aux_power: 2.0,
            inrush_amplitude: 300.0,
            inrush_decay: 3.0,
            inrush_window: 10.0,
            sensor_noise: 0.2,
            step: 1.0,
            initial: InitialState::Uniform(-18.0),
            seed,
        }
    }

    /// No process noise, no sensor noise, no aux power and no inrush.
    pub fn ideal(params: ThermalParameters) -> Self {
        PlantConfig {
            aux_power: 0.0,
            inrush_amplitude: 0.0,
            sensor_noise: 0.0,
            ..PlantConfig::new(params, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for (name, x) in [
            ("p_max", self.p_max),
            ("aux_power", self.aux_power),
            ("inrush_amplitude", self.inrush_amplitude),
            ("inrush_window", self.inrush_window),
            ("sensor_noise", self.sensor_noise),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::validation(name, format!("must be >= 0, got {x}")));
            }
        }
        if !(self.inrush_decay > 0.0) {
            return Err(Error::validation("inrush_decay", "must be > 0"));
        }
        if !(self.step == 1.0) {
            // The switch signal and the recording are per-second.
            return Err(Error::validation("step", "the plant integrates at 1 s"));
        }
        if let InitialState::Steady { duty } = self.initial {
            if !(0.0..=1.0).contains(&duty) {
                return Err(Error::validation("duty", "steady-state duty must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Per-second raw measurements as a logger would record them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawRecording {
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub t_r: Vec<f64>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
}

impl RawRecording {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, row: RawRow) {
        self.t.push(row.t);
        self.p.push(row.p);
        self.t_r.push(row.t_r);
        self.t1.push(row.t1);
        self.t2.push(row.t2);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if [self.p.len(), self.t_r.len(), self.t1.len(), self.t2.len()].iter().any(|&m| m != n) {
            return Err(Error::validation("recording", "columns differ in length"));
        }
        if let Some(k) = self.p.iter().position(|&x| !(x >= 0.0)) {
            return Err(Error::validation("P", format!("negative or missing power at row {k}")));
        }
        Ok(())
    }
}

/// One recorded second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawRow {
    pub t: f64,
    /// Electrical power drawn over `[t, t + 1)`, W.
    pub p: f64,
    pub t_r: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Ground-truth freezer integrated by Euler–Maruyama.
#[derive(Clone, Debug)]
pub struct Plant {
    cfg: PlantConfig,
    dss: DiscreteStateSpace,
    x: DVector<f64>,
    rng: ChaCha8Rng,
    t: f64,
    was_on: bool,
    on_since: f64,
}

impl Plant {
    /// `t_r0` is the room temperature used for a steady-state start.
    pub fn new(cfg: PlantConfig, t_r0: f64) -> Result<Self> {
        cfg.validate()?;
        let css = build_continuous(&cfg.params)?;
        let n = css.state_dim();
        let x = match &cfg.initial {
            InitialState::Uniform(v) => DVector::from_element(n, *v),
            InitialState::Steady { duty } => css.steady_state(t_r0, duty * cfg.p_max)?,
            InitialState::SteadyAt(y) => css.steady_state_at(t_r0, *y, cfg.p_max)?.0,
            InitialState::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::validation("initial state", format!("expected {n} values")));
                }
                DVector::from_column_slice(v)
            }
        };
        let dss = discretize(&css, cfg.step)?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Plant {
            cfg,
            dss,
            x,
            rng,
            t: 0.0,
            was_on: false,
            on_since: f64::NEG_INFINITY,
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// The noise-free measured node.
    pub fn true_output(&self) -> f64 {
        self.dss.output(&self.x)
    }

    /// Records the current second and advances one step with the switch at `on`.
    pub fn step(&mut self, on: bool, t_r: f64) -> Result<RawRow> {
        let cfg = &self.cfg;
        if on && !self.was_on {
            self.on_since = self.t;
        }
        self.was_on = on;
        let y = self.dss.output(&self.x);
        let sigma = cfg.sensor_noise;
        let mut gauss = || -> f64 { StandardNormal.sample(&mut self.rng) };
        let t1 = y + sigma * gauss();
        let t2 = y + sigma * gauss();
        let since = self.t - self.on_since;
        let spike = if on && since < cfg.inrush_window {
            cfg.inrush_amplitude * (-since / cfg.inrush_decay).exp()
        } else {
            0.0
        };
        let p_el = if on { cfg.p_max + spike } else { 0.0 } + cfg.aux_power;
        let thermal = if on { cfg.p_max } else { 0.0 };

        let mean = self.dss.step_mean(&self.x, t_r, thermal).map_err(|e| Error::Simulation {
            t: self.t,
            source: Box::new(e),
        })?;
        let n = self.x.len();
        let xi = DVector::from_fn(n, |_, _| gauss());
        self.x = mean + &self.dss.w * xi;
        let row = RawRow {
            t: self.t,
            p: p_el,
            t_r,
            t1,
            t2,
        };
        self.t += cfg.step;
        Ok(row)
    }
}

/// Drives a fresh plant with `switch`; `t_r` gives the room temperature per second
/// (a single value is held constant).
pub fn simulate(cfg: &PlantConfig, switch: &SwitchSignal, t_r: &[f64]) -> Result<RawRecording> {
    let n = switch.len();
    if !(t_r.len() == 1 || t_r.len() >= n) {
        return Err(Error::validation("T_r", format!("profile has {} values for {n} s", t_r.len())));
    }
    let room = |k: usize| if t_r.len() == 1 { t_r[0] } else { t_r[k] };
    let mut plant = Plant::new(cfg.clone(), room(0))?;
    let mut rec = RawRecording::default();
    for (k, &on) in switch.on.iter().enumerate() {
        rec.push(plant.step(on, room(k))?);
    }
    Ok(rec)
}

/// Hysteresis control on the averaged thermistor reading.
pub fn thermostat_run(cfg: &PlantConfig, band: (f64, f64), duration: f64, t_r: f64) -> Result<RawRecording> {
    let (lower, upper) = band;
    if !(lower < upper) {
        return Err(Error::validation("band", format!("lower {lower} must be below upper {upper}")));
    }
    let mut plant = Plant::new(cfg.clone(), t_r)?;
    let mut rec = RawRecording::default();
    let mut on = false;
    let steps = (duration / cfg.step).round() as usize;
    let mut last = None::<RawRow>;
    for _ in 0..steps {
        if let Some(r) = last {
            let reading = 0.5 * (r.t1 + r.t2);
            if reading > upper {
                on = true;
            } else if reading < lower {
                on = false;
            }
        }
        let row = plant.step(on, t_r)?;
        // The decision for the next second uses this second's reading.
        last = Some(row);
        rec.push(row);
    }
    Ok(rec)
}
