//! TOML configuration with environment overrides for the server settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ibgr::IbgrParams;
use crate::leaderrank::LeaderRankParams;
use crate::termination::TerminationConfig;
use crate::trust::TrustParams;

pub const ENV_PORT: &str = "GROUPDINE_PORT";
pub const ENV_DATA_DIR: &str = "GROUPDINE_DATA_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Recomputation cadence.
    pub tick_s: u64,
    pub bookmarking_s: u64,
    /// Previous messages shown to the recipient resolver.
    pub context_window: usize,
    pub top_k: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_s: 5,
            bookmarking_s: 360,
            context_window: 5,
            top_k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub proposed: String,
    pub baseline: String,
    pub sentiment: String,
    pub resolver: String,
    /// Lexicon file for the `lexicon` scorer; the built-in one when unset.
    pub lexicon: Option<PathBuf>,
    /// Program and arguments for the `external` resolver.
    pub resolver_command: Vec<String>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            proposed: "leaderrank".into(),
            baseline: "ibgr".into(),
            sentiment: "lexicon".into(),
            resolver: "heuristic".into(),
            lexicon: None,
            resolver_command: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    pub data_dir: PathBuf,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub trust: TrustParams,
    pub leaderrank: LeaderRankParams,
    pub ibgr: IbgrParams,
    pub termination: TerminationConfig,
    pub session: SessionConfig,
    pub strategies: StrategyConfig,
    pub server: ServerConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies port and data-directory overrides from `lookup`
    /// (normally `std::env::var`).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(port) = lookup(ENV_PORT) {
            self.server.port = port.trim().parse().map_err(|_| ConfigError::Env {
                name: ENV_PORT,
                message: format!("`{port}` is not a port number"),
            })?;
        }
        if let Some(dir) = lookup(ENV_DATA_DIR) {
            if dir.is_empty() {
                return Err(ConfigError::Env {
                    name: ENV_DATA_DIR,
                    message: "empty path".into(),
                });
            }
            self.server.data_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    pub fn apply_process_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env(|k| std::env::var(k).ok())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if let Err(e) = self.trust.validate() {
            return invalid(e.to_string());
        }
        if let Err(e) = self.termination.validate() {
            return invalid(e.to_string());
        }
        let lr = &self.leaderrank;
        if !(lr.lambda1 >= 0.0 && lr.lambda2 >= 0.0 && (lr.lambda1 + lr.lambda2 - 1.0).abs() < 1e-9) {
            return invalid("leaderrank.lambda1 and lambda2 must be non-negative and sum to 1".into());
        }
        if !(lr.epsilon_ground >= 0.0 && lr.epsilon_ground.is_finite()) {
            return invalid("leaderrank.epsilon_ground must be non-negative".into());
        }
        if !(lr.tolerance > 0.0) || lr.max_iter == 0 {
            return invalid("leaderrank.tolerance and max_iter must be positive".into());
        }
        if !(self.ibgr.leader_impact >= 1.0 && self.ibgr.leader_impact.is_finite()) {
            return invalid("ibgr.leader_impact must be at least 1".into());
        }
        let s = &self.session;
        if s.tick_s == 0 || s.bookmarking_s == 0 || s.top_k == 0 {
            return invalid("session.tick_s, bookmarking_s and top_k must be positive".into());
        }
        if self.strategies.resolver == "external" && self.strategies.resolver_command.is_empty() {
            return invalid("strategies.resolver_command is required for the external resolver".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
