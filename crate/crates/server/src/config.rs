use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use mdbs_core::exec::{ExecOptions, FailureMode};
use mdbs_site::FirewallPolicy;
use serde::{Deserialize, Serialize};

use crate::ServerError;

/// Per-site deployment details that do not belong in the catalog.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SiteOverride {
    /// Store directory of an embedded site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<PathBuf>,
    /// Agent base URL of a remote site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Firewall of an embedded site's agent. Defaults to forwarding the server only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<FirewallPolicy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecDefaults {
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub failure_mode: FailureMode,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
}

fn default_timeout_ms() -> u64 {
    2000
}

fn default_max_parallel() -> usize {
    8
}

impl Default for ExecDefaults {
    fn default() -> Self {
        ExecDefaults { timeout_ms: default_timeout_ms(), failure_mode: FailureMode::FailFast, max_parallel: default_max_parallel() }
    }
}

impl ExecDefaults {
    pub fn options(&self, failure_mode: Option<FailureMode>, timeout_ms: Option<u64>) -> ExecOptions {
        ExecOptions {
            timeout: Duration::from_millis(timeout_ms.unwrap_or(self.timeout_ms)),
            failure_mode: failure_mode.unwrap_or(self.failure_mode),
            max_parallel: self.max_parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig {
    pub listen: String,
    pub catalog: PathBuf,
    #[serde(default)]
    pub sites: BTreeMap<String, SiteOverride>,
    #[serde(default)]
    pub exec: ExecDefaults,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub console: Option<PathBuf>,
}

impl ServerConfig {
    /// A configuration serving `catalog` with defaults everywhere else.
    pub fn for_catalog(catalog: impl Into<PathBuf>, listen: &str) -> Self {
        ServerConfig {
            listen: listen.to_string(),
            catalog: catalog.into(),
            sites: BTreeMap::new(),
            exec: ExecDefaults::default(),
            console: None,
        }
    }

    /// Reads a JSON configuration. Relative paths are taken relative to the
    /// configuration file.
    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServerError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ServerConfig =
            serde_json::from_str(&text).map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.catalog = base.join(&cfg.catalog);
        cfg.console = cfg.console.map(|c| base.join(c));
        for o in cfg.sites.values_mut() {
            o.location = o.location.take().map(|l| base.join(l));
        }
        if cfg.exec.max_parallel == 0 {
            return Err(ServerError::Config("exec.max_parallel must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn site(&self, id: &str) -> Option<&SiteOverride> {
        self.sites.iter().find(|(k, _)| k.eq_ignore_ascii_case(id)).map(|(_, v)| v)
    }
}
