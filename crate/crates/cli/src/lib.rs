//! Command line front end and review API for the harmonization toolkit.

pub mod api;
pub mod cli;
pub mod commands;
mod error;

pub use error::{CliError, Result};
