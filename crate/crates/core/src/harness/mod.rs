//! Scenario harness: declarative experiment files, the runner that turns
//! them into CSV tables, and the per-node rate study.

use std::path::PathBuf;

use thiserror::Error;

use crate::netgen::NetError;

pub mod config;
pub mod network;
pub mod rates;
pub mod run;

pub use config::{builtin_names, Engine, Scenario, SweepVar};
pub use network::{build_network, BuiltNetwork};
pub use rates::{run_rate_study, spearman, RateRow, RateStudy};
pub use run::{run_scenario, ScenarioReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("scenario {scenario}, {context}: {message}")]
    Engine { scenario: String, context: String, message: String },
}

impl HarnessError {
    /// Short machine-readable category, used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::UnknownScenario(_) => "unknown_scenario",
            HarnessError::Io { .. } => "io",
            HarnessError::Net(_) => "network",
            HarnessError::Engine { .. } => "engine",
        }
    }

    pub(crate) fn engine(scenario: &str, context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        HarnessError::Engine { scenario: scenario.to_string(), context: context.into(), message: err.to_string() }
    }
}
