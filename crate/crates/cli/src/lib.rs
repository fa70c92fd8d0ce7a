//! Config parsing, subcommands and output writers behind the `pcaerr` binary.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, CliError, Command, Invocation};
pub use config::{parse_config, parse_config_str};
