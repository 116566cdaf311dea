//! Experiment harness around [`dagcusum_core`]: configuration and network
//! files, Monte Carlo runs, CSV output and the `dagcusum` command line.

pub mod cli;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod experiment;
pub mod topology_file;

pub use dagcusum_core as core;

pub use config::{ConfigFile, ExperimentPlan, Overrides};
pub use csv_io::{RunResult, SensorId};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentOutcome};
