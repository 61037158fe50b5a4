//! Service configuration, layered as: command-line flags, then the
//! `ONTOSEARCH_KB` / `ONTOSEARCH_PORT` environment variables, then an
//! optional TOML config file, then built-in defaults.

use std::path::{Path, PathBuf};

use ontosearch_core::ScoringParams;
use serde::Deserialize;
use thiserror::Error;

pub const ENV_KB: &str = "ONTOSEARCH_KB";
pub const ENV_PORT: &str = "ONTOSEARCH_PORT";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("no knowledge base given (use --kb or set {ENV_KB})")]
    MissingKb,
    #[error("invalid port `{0}` (expected 1-65535)")]
    InvalidPort(String),
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid scoring parameters: {0}")]
    Params(String),
}

/// Contents of the optional TOML config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kb_path: Option<PathBuf>,
    pub port: Option<u32>,
    pub cors_allowed_origin: Option<String>,
    #[serde(default)]
    pub scoring: ScoringParams,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub kb_path: PathBuf,
    pub port: u16,
    pub params: ScoringParams,
    pub cors_allowed_origin: Option<String>,
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kb_path: Option<PathBuf>,
    pub port: Option<u32>,
    pub cors_allowed_origin: Option<String>,
}

fn check_port(port: u32) -> Result<u16, ConfigError> {
    match u16::try_from(port) {
        Ok(p) if p >= 1 => Ok(p),
        _ => Err(ConfigError::InvalidPort(port.to_string())),
    }
}

impl ServiceConfig {
    pub fn resolve(
        flags: Overrides,
        env: impl Fn(&str) -> Option<String>,
        file: Option<ConfigFile>,
    ) -> Result<Self, ConfigError> {
        let file = file.unwrap_or_default();

        let kb_path = flags
            .kb_path
            .or_else(|| env(ENV_KB).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or(file.kb_path)
            .ok_or(ConfigError::MissingKb)?;

        let port = match flags.port {
            Some(p) => check_port(p)?,
            None => match env(ENV_PORT).filter(|v| !v.is_empty()) {
                Some(raw) => {
                    let parsed: u32 = raw.trim().parse().map_err(|_| ConfigError::InvalidPort(raw.clone()))?;
                    check_port(parsed)?
                }
                None => file.port.map(check_port).transpose()?.unwrap_or(DEFAULT_PORT),
            },
        };

        file.scoring
            .validate()
            .map_err(|e| ConfigError::Params(e.to_string()))?;

        Ok(Self {
            kb_path,
            port,
            params: file.scoring,
            cors_allowed_origin: flags.cors_allowed_origin.or(file.cors_allowed_origin),
        })
    }
}
