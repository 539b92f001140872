//! Versioned JSON experiment configuration.
//!
//! A config file is the core [`ExperimentConfig`] flattened at the top level
//! next to a `schema_version` tag and the batch axes (seeds and methods).
//! Every field has a default reproducing the reference simulation protocol,
//! so `{"schema_version": 1}` — or no file at all — is a valid setup.

use std::fs;
use std::path::Path;

use permap_core::mission::{ExperimentConfig, Method};
use serde::{Deserialize, Serialize};

use crate::{io_err, HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// On-disk experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    /// Explicit seed list for a batch. Mutually exclusive with `num_envs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Number of environments; expands to seeds `0..num_envs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_envs: Option<usize>,
    /// Methods a batch runs; defaults to all five ablations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            schema_version: SCHEMA_VERSION,
            experiment: ExperimentConfig::default(),
            seeds: None,
            num_envs: None,
            methods: None,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let config: FileConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "{}: unsupported schema_version {} (this build reads {})",
                path.display(),
                config.schema_version,
                SCHEMA_VERSION
            )));
        }
        if config.seeds.is_some() && config.num_envs.is_some() {
            return Err(HarnessError::Config(format!(
                "{}: seeds and num_envs are mutually exclusive",
                path.display()
            )));
        }
        config.experiment.validate()?;
        Ok(config)
    }

    /// The batch seed axis: explicit list, `0..num_envs`, or `0..50`.
    pub fn batch_seeds(&self) -> Vec<u64> {
        match (&self.seeds, self.num_envs) {
            (Some(seeds), _) => seeds.clone(),
            (None, Some(n)) => (0..n as u64).collect(),
            (None, None) => (0..50).collect(),
        }
    }

    /// The batch method axis; defaults to all five ablations.
    pub fn batch_methods(&self) -> Vec<Method> {
        self.methods
            .clone()
            .unwrap_or_else(|| Method::ALL.to_vec())
    }
}

/// Parse a `--seeds` argument: either a count `N` (seeds `0..N`) or an
/// explicit comma-separated list `a,b,c`.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    let parse_one = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| HarnessError::Config(format!("invalid seed value {s:?}")))
    };
    if raw.contains(',') {
        raw.split(',').map(parse_one).collect()
    } else {
        let n = parse_one(raw)?;
        Ok((0..n).collect())
    }
}

/// Parse a `--method` argument: one method name or a comma-separated list.
pub fn parse_methods(raw: &str) -> Result<Vec<Method>> {
    raw.split(',')
        .map(|s| {
            serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
                .map_err(|_| HarnessError::Config(format!("unknown method {s:?}")))
        })
        .collect()
}
