//! Command-line front end: single-stage commands and the staged run pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{Config, Stage};
pub use error::{CliError, CliResult};
pub use pipeline::{Check, Pipeline, RunManifest, StageRecord};
