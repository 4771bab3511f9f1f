//! Experiment driver: configuration parsing, the `propagate`, `sweep-l`,
//! `fgr` and `verify` commands, and their CSV output.

#![allow(clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;

pub use commands::{Engine, VERSION};
pub use config::{RawConfig, RunConfig};
pub use csv::Document;
pub use error::CliError;
