//! Experiment harness around `permap-core`: configuration files, the
//! method-by-seed batch matrix, CSV/JSON exporters, and SVG charts.

pub mod batch;
pub mod chart;
pub mod config;
pub mod export;

use std::path::PathBuf;

use serde::Serialize;

/// Harness-level error. Mission errors keep their (method, seed) cell so a
/// batch can report exactly which runs failed.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("core error: {0}")]
    Core(#[from] permap_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("{} of {} runs failed", failures.len(), total)]
    Partial {
        total: usize,
        failures: Vec<FailedCell>,
    },
}

/// One failed (method, seed) cell of a batch.
#[derive(Debug, Clone, Serialize)]
pub struct FailedCell {
    pub method: permap_core::mission::Method,
    pub seed: u64,
    pub error: String,
}

/// Machine-readable failure report printed on a nonzero exit.
#[derive(Debug, Serialize)]
pub struct FailureReport {
    pub error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailedCell>,
}

impl HarnessError {
    pub fn report(&self) -> FailureReport {
        let failures = match self {
            HarnessError::Partial { failures, .. } => failures.clone(),
            _ => Vec::new(),
        };
        FailureReport {
            error: self.to_string(),
            failures,
        }
    }
}

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}

pub(crate) fn csv_err(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Csv { path, source }
}

pub type Result<T> = core::result::Result<T, HarnessError>;
