//! Identified parameter sets shipped with the crate, used as ground truth
//! for the virtual plant.

use super::{ModelKind, ThermalParameters};

const MODEL_A: &str = include_str!("../../fixtures/model_a.params");
const MODEL_B: &str = include_str!("../../fixtures/model_b.params");
const MODEL_C: &str = include_str!("../../fixtures/model_c.params");
const MODEL_D: &str = include_str!("../../fixtures/model_d.params");
const MODEL_E: &str = include_str!("../../fixtures/model_e.params");

/// Raw fixture text for `kind`.
pub fn source(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::A => MODEL_A,
        ModelKind::B => MODEL_B,
        ModelKind::C => MODEL_C,
        ModelKind::D => MODEL_D,
        ModelKind::E => MODEL_E,
    }
}

/// Parsed fixture parameters for `kind`.
pub fn table(kind: ModelKind) -> ThermalParameters {
    ThermalParameters::from_kv_str(source(kind)).expect("shipped fixtures are valid")
}

/// Log-likelihood reported alongside each identified parameter set.
pub fn reported_loglik(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::A => 19833.1,
        ModelKind::B => 25165.4,
        ModelKind::C => 25168.9,
        ModelKind::D => 25169.9,
        ModelKind::E => 25187.6,
    }
}
