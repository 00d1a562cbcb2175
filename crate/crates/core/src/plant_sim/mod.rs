//! Virtual freezer: PRBS excitation, stochastic plant, raw-measurement
//! artifacts and the preprocessing that turns them into a [`TimeSeries`].

mod plant;
mod preprocess;
mod prbs;

pub use plant::{simulate, thermostat_run, InitialState, Plant, PlantConfig, RawRecording, RawRow};
pub use prbs::{prbs_generate, PrbsConfig, SwitchSignal};
pub use preprocess::{preprocess, PowerCleaner, PreprocessConfig};

use crate::error::Result;
use crate::estimation::TimeSeries;

/// Room temperature used when no profile is given, °C.
pub const DEFAULT_ROOM_TEMPERATURE: f64 = 23.0;

/// PRBS-driven record from `cfg`, preprocessed to period `d`.
pub fn prbs_dataset(cfg: &PlantConfig, prbs: &PrbsConfig, d: f64) -> Result<TimeSeries> {
    let switch = prbs_generate(prbs)?;
    let raw = simulate(cfg, &switch, &[DEFAULT_ROOM_TEMPERATURE])?;
    preprocess(&raw, &preprocess_config_for(cfg, d))
}

/// Preprocessing matched to the plant's aux power and nominal power.
pub fn preprocess_config_for(cfg: &PlantConfig, d: f64) -> PreprocessConfig {
    PreprocessConfig {
        aux_power: cfg.aux_power,
        p_max: cfg.p_max,
        ..PreprocessConfig::new(d)
    }
}
