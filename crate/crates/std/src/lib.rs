//! File formats, replication studies and the `care` command-line front end
//! for [`care_core`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod study;

pub use error::{CliError, FormatError, Result};

#[cfg(test)]
mod cli_tests;
