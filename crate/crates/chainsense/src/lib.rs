//! Experiment driver for field estimation on a measured spin chain.
//!
//! Configuration, file formats, the parallel sweep runner, the subcommands
//! behind the `chainsense` binary and the acceptance checks live here; all
//! numerics come from [`chainsense_core`].

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod oracle;
pub mod sweep;

pub use config::RunConfig;
pub use error::{CliError, Result};
