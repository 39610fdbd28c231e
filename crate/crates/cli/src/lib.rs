//! Configuration-driven experiment runner for the fractional fast diffusion lab.

pub mod checks;
pub mod commands;
pub mod config;
pub mod io;
pub mod run;
pub mod sweep;

pub use commands::main_with_args;
pub use config::{CheckSpec, ExperimentConfig, SweepPlan};
