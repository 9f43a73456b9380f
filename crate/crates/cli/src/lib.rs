//! Configuration parsing and subcommands behind the `pcf` binary.

pub mod commands;
pub mod config;

pub use commands::{run, Command, RunError};
pub use config::{load_config, parse_config, Config, ConfigError};
