//! File formats, configuration and command implementations for the
//! `dyncon` command-line tool.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;

pub use dyncon_core as core;
pub use error::CliError;
