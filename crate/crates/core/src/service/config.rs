//! Service configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Pricing;
use crate::governance::Durability;
use crate::workflow::GuardConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    #[default]
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer credential.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub backend: BackendMode,
    pub remote: Option<RemoteConfig>,
    /// Directory of scenario fixtures for the scripted backend; the bundled
    /// scenarios when absent.
    pub scenario_dir: Option<PathBuf>,
    /// Run the critic pass. Off gives the agent-only pipeline.
    pub with_critic: bool,
    pub guards: GuardConfig,
    pub pricing: Pricing,
    /// Guideline corpus as JSON; the bundled corpus when absent.
    pub corpus_path: Option<PathBuf>,
    /// Holds `ledger.jsonl` and `cases/`.
    pub data_dir: PathBuf,
    pub durability: Durability,
    /// Queue escalated cases ahead of normal ones.
    pub escalated_first: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".to_string(),
            backend: BackendMode::Scripted,
            remote: None,
            scenario_dir: None,
            with_critic: true,
            guards: GuardConfig::default(),
            pricing: Pricing::default(),
            corpus_path: None,
            data_dir: PathBuf::from("data"),
            durability: Durability::Fsync,
            escalated_first: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn is_env_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ServiceConfig {
    /// `.toml` files are TOML, anything else JSON.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let config = if is_toml { Self::from_toml(&raw)? } else { Self::from_json(&raw)? };
        Ok(config)
    }

    pub fn from_toml(raw: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(raw: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.listen.trim().is_empty() {
            return Err(ConfigError::Invalid("listen address is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.guards.escalation_threshold) {
            return Err(ConfigError::Invalid("guards.escalation_threshold must lie in [0, 1]".into()));
        }
        if self.pricing.input_per_million < 0.0 || self.pricing.output_per_million < 0.0 {
            return Err(ConfigError::Invalid("prices must be non-negative".into()));
        }
        if let Some(remote) = &self.remote {
            if let Some(var) = &remote.credential_env {
                if !is_env_name(var) {
                    return Err(ConfigError::Invalid(format!(
                        "remote.credential_env must name an environment variable, got {var:?}"
                    )));
                }
            }
            if remote.timeout_secs == 0 {
                return Err(ConfigError::Invalid("remote.timeout_secs must be positive".into()));
            }
        }
        if self.backend == BackendMode::Remote {
            match &self.remote {
                Some(r) if !r.endpoint.trim().is_empty() => {}
                _ => return Err(ConfigError::Invalid("remote backend requires remote.endpoint".into())),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ServiceConfig::default().validate().unwrap();
    }

    #[test]
    fn remote_mode_requires_an_endpoint() {
        let err = ServiceConfig::from_toml("backend = \"remote\"\n").unwrap_err();
        assert!(err.to_string().contains("remote.endpoint"), "{err}");
        let ok = ServiceConfig::from_toml(
            "backend = \"remote\"\n[remote]\nendpoint = \"http://127.0.0.1:9/v1\"\ncredential_env = \"UW_TOKEN\"\n",
        )
        .unwrap();
        assert_eq!(ok.remote.unwrap().credential_env.as_deref(), Some("UW_TOKEN"));
    }

    #[test]
    fn credentials_cannot_live_in_the_file() {
        let err = ServiceConfig::from_toml(
            "backend = \"remote\"\n[remote]\nendpoint = \"http://x\"\napi_key = \"sk-123\"\n",
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
        let err = ServiceConfig::from_json(r#"{"remote": {"endpoint": "http://x", "credential_env": "sk-live 123"}}"#)
            .unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
    }

    #[test]
    fn toml_and_json_agree() {
        let t = ServiceConfig::from_toml("listen = \"0.0.0.0:9000\"\nescalated_first = true\ndata_dir = \"/tmp/uw\"\n")
            .unwrap();
        let j = ServiceConfig::from_json(r#"{"listen": "0.0.0.0:9000", "escalated_first": true, "data_dir": "/tmp/uw"}"#)
            .unwrap();
        assert_eq!(t, j);
        assert!(t.with_critic);
    }
}
