//! Command-line front end of the `paretoreid` toolkit.
//!
//! The binary is a thin wrapper around [`commands::run`]; everything here is
//! public so integration tests can build configurations the same way.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod setup;

pub use args::Cli;
pub use error::{CliError, CliResult};
