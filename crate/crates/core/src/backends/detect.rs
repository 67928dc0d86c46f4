use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable that forces a backend choice.
pub const BACKEND_ENV: &str = "SLICEWISE_BACKEND";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Sge,
    Slurm,
    Local,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Sge => "sge",
            BackendKind::Slurm => "slurm",
            BackendKind::Local => "local",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sge" => Ok(BackendKind::Sge),
            "slurm" => Ok(BackendKind::Slurm),
            "local" => Ok(BackendKind::Local),
            _ => Err(Error::UnknownBackend(s.to_owned())),
        }
    }
}

fn present(env: &HashMap<String, String>, key: &str) -> bool {
    env.get(key).is_some_and(|v| !v.is_empty())
}

/// Picks the batch environment.
///
/// Precedence: explicit override, then `SLICEWISE_BACKEND`, then Slurm markers
/// (`SLURM_CONF`, `SLURM_CLUSTER_NAME`), then `SGE_ROOT`, then local. Empty
/// values count as unset.
pub fn detect_backend(
    env: &HashMap<String, String>,
    override_kind: Option<BackendKind>,
) -> Result<BackendKind> {
    if let Some(kind) = override_kind {
        return Ok(kind);
    }
    if present(env, BACKEND_ENV) {
        return env[BACKEND_ENV].parse();
    }
    if present(env, "SLURM_CONF") || present(env, "SLURM_CLUSTER_NAME") {
        return Ok(BackendKind::Slurm);
    }
    if present(env, "SGE_ROOT") {
        return Ok(BackendKind::Sge);
    }
    Ok(BackendKind::Local)
}

/// The current process environment as a map.
pub fn process_env() -> HashMap<String, String> {
    std::env::vars().collect()
}
