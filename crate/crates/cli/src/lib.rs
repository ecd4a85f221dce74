//! Configuration parsing and experiment dispatch for the `snse` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_str, ConfigError, RunSpec};
pub use run::{run, Command, Outcome, RunError};
