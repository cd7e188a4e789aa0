//! Command-line front end: panel CSV IO, run configuration, report output
//! and the World Bank indicators client.

pub mod commands;
pub mod config;
pub mod error;
pub mod panel_io;
pub mod worldbank;

pub use error::{CliError, Result};
