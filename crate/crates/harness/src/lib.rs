//! Experiment runner for the zeroth-order diffusive proximal sampler:
//! configuration, per-seed runs, KL and occupancy evaluation, sweeps, and
//! CSV / SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod plot;

pub use cli::cli_main;
pub use config::{preset, ExperimentConfig, PRESETS};
pub use error::{HarnessError, Result};
pub use experiment::{
    run_config, run_experiment, sweep_mn, sweep_step_size, ExperimentReport, SweepReport,
};
