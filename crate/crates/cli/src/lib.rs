//! Experiment runner for boundary-stencil identification on the 1D wave
//! equation. The binary is a thin wrapper over [`args`] and [`commands`].

pub mod args;
pub mod commands;
pub mod config;

pub use config::{ExperimentConfig, InitialCondition, SweepRange, PRESETS};
