use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use covarc_core::RiskConfig;
use serde::Deserialize;

pub const ENV_SNAPSHOT_DIR: &str = "COVARC_SNAPSHOT_DIR";
pub const ENV_LISTEN: &str = "COVARC_LISTEN";
pub const ENV_RELOAD_SECS: &str = "COVARC_RELOAD_SECS";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

/// Service settings, read from TOML and then overridden from the environment.
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// snapshot_dir = "data/snapshot"
/// reload_secs = 3600          # 0 = never
/// allowed_origins = ["http://localhost:5173"]
/// reload_token = "change-me"  # enables POST /api/v1/reload
/// static_dir = "webui/dist"   # optional
///
/// [risk]
/// k_outdoor = 0.05
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub snapshot_dir: PathBuf,
    #[serde(default)]
    pub reload_secs: u64,
    #[serde(default)]
    pub risk: RiskConfig,
    #[serde(default)]
    pub allowed_origins: Vec<String>,
    #[serde(default)]
    pub reload_token: Option<String>,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    /// Use the bundled tables when the snapshot has no `tables/` directory.
    #[serde(default)]
    pub builtin_tables_fallback: bool,
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

impl ServiceConfig {
    pub fn new(snapshot_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            listen: default_listen(),
            snapshot_dir: snapshot_dir.into(),
            reload_secs: 0,
            risk: RiskConfig::default(),
            allowed_origins: Vec::new(),
            reload_token: None,
            static_dir: None,
            builtin_tables_fallback: false,
        }
    }

    pub fn from_toml(raw: &str) -> Result<Self, ConfigError> {
        toml::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Read `path`, apply process environment overrides and validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::from_toml(&raw)?;
        // relative paths in the file are taken from the file's directory
        let base = path.parent().unwrap_or(Path::new("."));
        if config.snapshot_dir.is_relative() {
            config.snapshot_dir = base.join(&config.snapshot_dir);
        }
        if let Some(dir) = config.static_dir.as_mut().filter(|d| d.is_relative()) {
            *dir = base.join(&*dir);
        }
        config.apply_env(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(dir) = lookup(ENV_SNAPSHOT_DIR) {
            self.snapshot_dir = dir.into();
        }
        if let Some(listen) = lookup(ENV_LISTEN) {
            self.listen = listen;
        }
        if let Some(secs) = lookup(ENV_RELOAD_SECS) {
            self.reload_secs = secs.trim().parse().map_err(|_| ConfigError::Invalid {
                field: ENV_RELOAD_SECS,
                message: format!("expected a non-negative integer, got '{secs}'"),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.listen_addr()?;
        if !self.snapshot_dir.is_dir() {
            return Err(ConfigError::Invalid {
                field: "snapshot_dir",
                message: format!("{} is not a directory", self.snapshot_dir.display()),
            });
        }
        self.risk.validate().map_err(|e| ConfigError::Invalid {
            field: "risk",
            message: e.to_string(),
        })?;
        if self.reload_token.as_deref().is_some_and(|t| t.trim().is_empty()) {
            return Err(ConfigError::Invalid {
                field: "reload_token",
                message: "must not be empty".into(),
            });
        }
        Ok(())
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen.parse().map_err(|_| ConfigError::Invalid {
            field: "listen",
            message: format!("'{}' is not a socket address", self.listen),
        })
    }
}
