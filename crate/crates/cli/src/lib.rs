//! Experiment runner: training, evaluation, scoring, the yaw oracle,
//! static-to-dynamic transfer and a bridge server.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_seeds, ExperimentConfig, ExperimentError};
