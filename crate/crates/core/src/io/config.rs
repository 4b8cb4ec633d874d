// SPDX-License-Identifier: Apache-2.0

//! TOML configuration. Every section and key is optional; command-line
//! flags override file values. Secrets are never read from this file, only
//! the names of the environment variables that hold them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::FieldMap;
use crate::analytics::{FrontierGranularity, RankKey};
use crate::curation::CurationConfig;
use crate::judge::Averaging;
use crate::llm::{GatewayConfig, HttpConfig};
use crate::refine::LoopConfig;
use crate::sandbox::{RemoteConfig, ToolchainTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BackendConfig {
    Local {
        #[serde(default)]
        toolchains: Option<ToolchainTable>,
    },
    Remote(RemoteConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Local { toolchains: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxConfig {
    /// Concurrent executions per batch.
    pub workers: usize,
    pub backend: BackendConfig,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            backend: BackendConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProviderConfig {
    Http(HttpConfig),
    Replay { dir: PathBuf },
    /// Live calls whose responses are also written to `dir`.
    Record {
        dir: PathBuf,
        #[serde(flatten)]
        http: HttpConfig,
    },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Http(HttpConfig::default())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    pub rank_key: RankKey,
    pub granularity: FrontierGranularity,
    pub averaging: Averaging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Problems processed concurrently.
    pub problem_workers: usize,
    /// Directory of seed generators named `<problem id>.<ext>`.
    pub seed_generators: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem_workers: 1,
            seed_generators: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "loop")]
    pub loop_: LoopConfig,
    pub sandbox: SandboxConfig,
    pub provider: ProviderConfig,
    pub gateway: GatewayConfig,
    pub curation: CurationConfig,
    pub ingest: FieldMap,
    pub analytics: AnalyticsConfig,
    pub run: RunConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.loop_.validate().map_err(ConfigError::Invalid)?;
        if self.sandbox.workers == 0 {
            return Err(ConfigError::Invalid("sandbox.workers must be at least 1".into()));
        }
        if self.run.problem_workers == 0 {
            return Err(ConfigError::Invalid("run.problem_workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
