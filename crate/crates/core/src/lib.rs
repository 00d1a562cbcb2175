//! Grey-box modelling and economic model predictive control of a domestic
//! freezer.
//!
//! The crate is organized bottom-up:
//!
//! * [`thermal_models`]: thermal-equivalent-circuit models A–E, their
//!   stochastic state-space forms and forward-Euler discretization.
//! * [`estimation`]: Kalman / extended Kalman filtering, innovations
//!   likelihood, multi-start maximum likelihood, residual whiteness and
//!   deviance tests, k-step prediction scoring.
//! * [`plant_sim`]: a virtual freezer driven by Euler–Maruyama integration,
//!   PRBS excitation, raw measurement artifacts and the matching
//!   preprocessing pipeline.
//! * [`mpc`]: condensed LP with temperature soft constraints, sequential
//!   linearization for the Carnot model, PWM actuation and flexibility
//!   metrics.
//! * [`io`]: CSV and key-value file formats shared with the CLI.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod io;
pub mod mpc;
pub mod optim;
pub mod plant_sim;
pub mod simplex;
pub mod stats;
pub mod thermal_models;

pub use error::{Error, Result};
