//! Wind-farm control laboratory.
//!
//! * [`wake`]: steady Gaussian wake engine and farm solver.
//! * [`dynamics`]: time-stepped farm with wake advection and blade loads.
//! * [`env`]: multi-agent environment, rewards, duty cycle and wind scenarios.
//! * [`bridge`]: framed co-simulation protocol.
//! * [`marl`]: actor-critic learners (IPPO, MAPPO) with their own autodiff.
//! * [`eval`]: scoring, wake graph, yaw oracle and transfer harness.

pub mod bridge;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod eval;
pub mod marl;
pub mod wake;

pub use error::{Error, Result};
