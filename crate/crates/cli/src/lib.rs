//! Configuration-driven runs of the memspin simulator.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_with, ConfigError, ExperimentConfig, Mode, Overrides};
pub use run::{run, Report, RunOptions};
