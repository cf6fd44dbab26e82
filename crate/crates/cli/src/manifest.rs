use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sg2d_core::{compute_gamma_n, compute_sigma_n};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The run completed but a built-in check was breached.
    Failed,
    /// The run could not complete.
    Error,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub status: RunStatus,
    /// One entry per breached check.
    pub failures: Vec<String>,
    pub error: Option<String>,
    pub config: Option<RunConfig>,
    /// SHA-256 of `blob <len>\0<resolved config TOML>`.
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub sigma_n: Option<f64>,
    pub gamma_n: Option<f64>,
    pub replicas: Option<usize>,
    pub wall_clock_seconds: f64,
    /// Files written next to the manifest.
    pub outputs: Vec<String>,
    /// Subcommand-specific metadata (integrator tags, fitted values).
    pub details: serde_json::Value,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let body = cfg.to_toml();
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", body.len()).as_bytes());
    hasher.update(body.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(subcommand: &str, cfg: Option<&RunConfig>) -> Self {
        let profile = cfg.and_then(|c| c.cutoff_profile().ok());
        let (sigma_n, gamma_n) = match (cfg, profile) {
            (Some(c), Some(p)) => (
                Some(compute_sigma_n(c.n, p)),
                Some(compute_gamma_n(c.n, c.beta_sq, p)),
            ),
            _ => (None, None),
        };
        Self {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: RunStatus::Ok,
            failures: Vec::new(),
            error: None,
            config: cfg.cloned(),
            config_hash: cfg.map(config_hash),
            seed: cfg.map(|c| c.seed),
            sigma_n,
            gamma_n,
            replicas: cfg.map(|c| c.replicas),
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn write(&self, path: &std::path::Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
