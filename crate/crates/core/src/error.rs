use thiserror::Error;

/// Errors raised across identification, simulation and control.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates its contract.
    #[error("invalid {name}: {reason}")]
    Validation { name: String, reason: String },

    /// A thermodynamic relation evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Forward-Euler discretization is unstable at the requested period.
    #[error("unstable discretization at d = {d} s (spectral radius {radius:.6})")]
    UnstableDiscretization { d: f64, radius: f64 },

    /// Filter or solver arithmetic broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Every optimizer start failed.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// The plant simulation left the model domain at time `t`.
    #[error("simulation error at t = {t} s: {source}")]
    Simulation {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    /// The LP solver stopped before proving optimality.
    #[error("LP solver stopped: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
