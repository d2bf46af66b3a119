//! Scenario-driven front end for the `weakflow` analyses.
//!
//! A scenario file names one analysis kind and its inputs; [`run::run`]
//! executes it and writes `report.json` plus CSV tables for time series.

pub mod report;
pub mod run;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("scenario schema violation {0}")]
    Schema(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("scenario `{scenario}` ({kind}): {message}")]
    Module {
        scenario: String,
        kind: &'static str,
        message: String,
    },
    #[error("subcommand `{command}` cannot run a scenario of kind {kind}")]
    KindMismatch {
        command: &'static str,
        kind: &'static str,
    },
}
