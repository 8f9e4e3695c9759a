//! File formats, configuration and the command-line runner for the
//! readmission risk pipeline.

pub mod bundle;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod svg;

pub use error::{CliError, Result};
