//! Economic receding-horizon control: condensed LP with soft temperature
//! bounds, sequential linearization for the Carnot model, PWM actuation and
//! run metrics.

mod condense;
mod config;
mod lp;
mod metrics;
mod nonlinear;
mod pwm;
mod receding;

pub use condense::{condense, CondensedProblem};
pub use config::{paper_price_step, MpcConfig, PricingSignal};
pub use lp::{build_and_solve_lp, MpcSolution};
pub use metrics::{mean_power, metrics, violations, RunMetrics};
pub use nonlinear::{simulate_mean, solve_nonlinear_horizon, NonlinearSolution};
pub use pwm::{count_transitions, pwm_translate, PwmPeriod, PwmSchedule};
pub use receding::{receding_horizon_run, MpcTrace, RunOptions, TraceRow, MEASUREMENT_WINDOW};
