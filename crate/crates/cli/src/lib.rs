//! Library side of the `pram-forge` command-line tool: scenario
//! configuration, the seeded simulation harness and subcommand handlers.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use error::{CliError, CliResult};
