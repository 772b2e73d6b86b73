use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::ServerError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ServerConfig {
    pub listen_address: String,
    /// `.aasx`, `.system.json` or `.component.json`.
    pub environment_source: PathBuf,
    /// Where `.component.json` files for a system document live; defaults to its directory.
    #[serde(default)]
    pub components_dir: Option<PathBuf>,
    pub bridge_address: String,
    #[serde(default)]
    pub telemetry_persist_path: Option<PathBuf>,
}

fn check_host_port(field: &str, value: &str) -> Result<(), ServerError> {
    let ok = value
        .rsplit_once(':')
        .is_some_and(|(host, port)| !host.is_empty() && !host.contains(char::is_whitespace) && port.parse::<u16>().is_ok());
    if ok {
        Ok(())
    } else {
        Err(ServerError::Config(format!("{field} '{value}' is not host:port")))
    }
}

impl ServerConfig {
    /// Parses a config document; relative paths are taken relative to `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, ServerError> {
        let mut config: Self = serde_json::from_str(text).map_err(|e| ServerError::Config(e.to_string()))?;
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut config.environment_source);
        config.components_dir.as_mut().map(rebase);
        config.telemetry_persist_path.as_mut().map(rebase);
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ServerError> {
        let text = std::fs::read_to_string(path).map_err(|source| ServerError::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn check(&self) -> Result<(), ServerError> {
        check_host_port("listenAddress", &self.listen_address)?;
        check_host_port("bridgeAddress", &self.bridge_address)
    }
}
