//! Library side of the experiment runner: config parsing, experiment
//! orchestration, and report emission. The `bqml-sim` binary is a thin
//! wrapper over these.

pub mod config;
pub mod error;
pub mod report;

pub use config::{parse_config, parse_config_str, ExperimentConfig};
pub use error::{CliError, Result};
pub use report::{emit_report, run_experiment, RunReport, Summary};
