//! Batch experiment runner for the uncertain-horizon portfolio solvers.
//!
//! A run reads a TOML configuration, solves one experiment and writes CSV
//! files into an output directory.

pub mod config;
pub mod format;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Solver(#[from] horizon_core::Error),
}

impl CliError {
    /// Stable tag used in the machine-readable error record.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid_config",
            CliError::Read { .. } | CliError::Write(_) | CliError::Csv(_) => "io",
            CliError::Solver(e) => e.kind(),
        }
    }

    /// One-line JSON record `{"error": kind, "message": text}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
