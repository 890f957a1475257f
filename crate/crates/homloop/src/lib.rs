//! Configuration, file formats and subcommands of the `homloop` command line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::ExperimentConfig;
pub use error::CliError;
pub use output::OutDir;
