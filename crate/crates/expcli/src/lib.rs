//! Experiment harness for the `metapower` library: configuration files,
//! presets for the six comparisons, and the seeded experiment runner.

pub mod commands;
pub mod config;
pub mod error;
pub mod preset;
pub mod run;

pub use config::{parse_config, parse_config_str, ExperimentConfig, Method, SweepVar};
pub use error::{CliError, Result};
pub use preset::{preset, PRESETS};
pub use run::{run_experiment, with_threads, ExperimentOutput, ResultRow};
