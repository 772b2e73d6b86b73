//! Type-2 access to a robot system's shell: read-only views of the environment
//! and the four generic command operations, backed by the command registry.

mod config;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use aas_bridge::dispatcher::{run_bridge_client, DispatcherOptions};
use aas_core::aasx::read_aasx;
use aas_core::generate::{gen_component_aas, gen_system_aas, refresh_operational_data};
use aas_core::ingest::{component_set, parse_component, parse_system, ComponentSet};
use aas_core::lifecycle::{CapabilityCatalog, Clock, CommandRegistry, SystemClock};
use aas_core::model::{validate, AasEnvironment};
use aas_core::TelemetryLedger;
use tokio::net::TcpListener;
use tokio::sync::watch;

pub use config::ServerConfig;
pub use routes::router;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("config: {0}")]
    Config(String),
    #[error("environment {path}: {message}")]
    Environment { path: PathBuf, message: String },
    #[error("telemetry snapshot {path}: {message}")]
    Telemetry { path: PathBuf, message: String },
    #[error("cannot listen on {address}: {source}")]
    Bind {
        address: String,
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl ServerError {
    pub fn code(&self) -> &'static str {
        match self {
            ServerError::Config(_) => "ConfigError",
            ServerError::Environment { .. } => "EnvironmentError",
            ServerError::Telemetry { .. } => "TelemetryError",
            ServerError::Bind { .. } => "BindError",
            ServerError::Io { .. } => "IoError",
        }
    }

    /// Input problems as opposed to failures of the machine or network.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            ServerError::Config(_) | ServerError::Environment { .. } | ServerError::Telemetry { .. }
        )
    }
}

fn read_text(path: &Path) -> Result<String, ServerError> {
    std::fs::read_to_string(path).map_err(|source| ServerError::Io {
        context: format!("reading {}", path.display()),
        source,
    })
}

/// Parses every `*.component.json` in `dir`, in file name order.
pub fn read_components(dir: &Path) -> Result<ComponentSet, ServerError> {
    let entries = std::fs::read_dir(dir).map_err(|e| ServerError::Io {
        context: format!("listing {}", dir.display()),
        source: e,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".component.json"))
        .collect();
    paths.sort();
    let mut components = Vec::new();
    for path in paths {
        let model = parse_component(&read_text(&path)?).map_err(|e| ServerError::Environment {
            path: path.clone(),
            message: e.to_string(),
        })?;
        components.push(model);
    }
    Ok(component_set(components))
}

/// Builds an environment from an `.aasx` package, a `.system.json` document
/// (components read from `components_dir`, else its own directory), or a
/// `.component.json` document. No validation.
pub fn read_environment(source: &Path, components_dir: Option<&Path>) -> Result<AasEnvironment, ServerError> {
    let bad = |message: String| ServerError::Environment {
        path: source.to_path_buf(),
        message,
    };
    let name = source.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if name.ends_with(".aasx") {
        let bytes = std::fs::read(source).map_err(|e| ServerError::Io {
            context: format!("reading {}", source.display()),
            source: e,
        })?;
        read_aasx(&bytes).map_err(|e| bad(e.to_string()))
    } else if name.ends_with(".system.json") {
        let text = read_text(source)?;
        let dir = components_dir
            .map(Path::to_path_buf)
            .or_else(|| source.parent().map(Path::to_path_buf))
            .unwrap_or_default();
        let set = read_components(&dir)?;
        let system = parse_system(&text, &set).map_err(|e| bad(e.to_string()))?;
        Ok(gen_system_aas(&system, &set).map_err(|e| bad(e.to_string()))?.env)
    } else if name.ends_with(".component.json") {
        let model = parse_component(&read_text(source)?).map_err(|e| bad(e.to_string()))?;
        Ok(gen_component_aas(&model).env)
    } else {
        Err(bad("expected a .aasx, .system.json or .component.json file".into()))
    }
}

/// [`read_environment`] followed by validation.
pub fn load_environment(source: &Path, components_dir: Option<&Path>) -> Result<AasEnvironment, ServerError> {
    let env = read_environment(source, components_dir)?;
    let violations = validate(&env);
    if let Some(first) = violations.first() {
        return Err(ServerError::Environment {
            path: source.to_path_buf(),
            message: format!("{} violation(s), first: {first}", violations.len()),
        });
    }
    Ok(env)
}

/// Shared state of the request handlers.
pub struct AppState {
    env: AasEnvironment,
    registry: Arc<CommandRegistry>,
    started: Instant,
}

impl AppState {
    pub fn new(env: AasEnvironment, registry: Arc<CommandRegistry>) -> Self {
        Self {
            env,
            registry,
            started: Instant::now(),
        }
    }

    /// State for `env` with a fresh registry over its capabilities.
    pub fn for_environment(env: AasEnvironment) -> Self {
        let registry = CommandRegistry::new(CapabilityCatalog::from_environment(&env));
        Self::new(env, Arc::new(registry))
    }

    pub fn registry(&self) -> &Arc<CommandRegistry> {
        &self.registry
    }

    /// The environment as served: OperationalData rebuilt from the current ledger.
    pub fn view(&self) -> AasEnvironment {
        if self.env.system_shell().is_none() {
            return self.env.clone();
        }
        let now = self.registry.clock().wall();
        refresh_operational_data(&self.env, &self.registry.ledger(), now).expect("system shell checked above")
    }

    /// The shell addressed by `/submodels/...` routes.
    fn primary_shell(&self) -> Option<&str> {
        self.env
            .system_shell()
            .or_else(|| self.env.shells.first())
            .map(|s| s.id_short.as_str())
    }
}

/// Writes `ledger` to `path` via a temporary file in the same directory and a rename.
pub fn persist_ledger(ledger: &TelemetryLedger, path: &Path) -> Result<(), ServerError> {
    let io = |context: &str, source: std::io::Error| ServerError::Io {
        context: format!("{context} {}", path.display()),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io("creating temporary file for", e))?;
    std::io::Write::write_all(&mut tmp, ledger.to_snapshot_json().as_bytes()).map_err(|e| io("writing", e))?;
    tmp.as_file().sync_all().map_err(|e| io("syncing", e))?;
    tmp.persist(path).map_err(|e| io("replacing", e.error))?;
    Ok(())
}

pub fn load_ledger(path: &Path) -> Result<Option<TelemetryLedger>, ServerError> {
    match std::fs::read_to_string(path) {
        Ok(text) => TelemetryLedger::from_snapshot_json(&text)
            .map(Some)
            .map_err(|e| ServerError::Telemetry {
                path: path.to_path_buf(),
                message: e.to_string(),
            }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(ServerError::Io {
            context: format!("reading {}", path.display()),
            source,
        }),
    }
}

/// A server whose environment is loaded and whose socket is bound.
pub struct BoundServer {
    state: Arc<AppState>,
    listener: TcpListener,
    bridge: SocketAddr,
    persist: Option<PathBuf>,
}

impl BoundServer {
    pub async fn bind(config: &ServerConfig) -> Result<Self, ServerError> {
        let env = load_environment(&config.environment_source, config.components_dir.as_deref())?;
        let ledger = match &config.telemetry_persist_path {
            Some(path) => load_ledger(path)?,
            None => None,
        };
        let clock: Arc<dyn Clock> = Arc::new(SystemClock::new());
        let registry = CommandRegistry::with_clock(CapabilityCatalog::from_environment(&env), clock, ledger);
        let bridge = tokio::net::lookup_host(&config.bridge_address)
            .await
            .ok()
            .and_then(|mut addrs| addrs.next())
            .ok_or_else(|| ServerError::Config(format!("cannot resolve bridgeAddress '{}'", config.bridge_address)))?;
        let listener = TcpListener::bind(&config.listen_address)
            .await
            .map_err(|source| ServerError::Bind {
                address: config.listen_address.clone(),
                source,
            })?;
        Ok(Self {
            state: Arc::new(AppState::new(env, Arc::new(registry))),
            listener,
            bridge,
            persist: config.telemetry_persist_path.clone(),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    /// Serves until `shutdown` resolves, then stops the dispatcher and persists the ledger.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServerError> {
        let (stop_tx, stop_rx) = watch::channel(false);
        let bridge = tokio::spawn(run_bridge_client(
            self.state.registry.clone(),
            self.bridge,
            stop_rx,
            DispatcherOptions::default(),
        ));
        tracing::info!(address = %self.local_addr(), robot = %self.bridge, "serving");
        let served = axum::serve(self.listener, router(self.state.clone()))
            .with_graceful_shutdown(shutdown)
            .await;
        let _ = stop_tx.send(true);
        let _ = bridge.await;
        if let Some(path) = &self.persist {
            persist_ledger(&self.state.registry.ledger(), path)?;
            tracing::info!(path = %path.display(), "telemetry persisted");
        }
        served.map_err(|source| ServerError::Io {
            context: "serving".into(),
            source,
        })
    }
}

/// Loads, binds and serves `config` until `shutdown` resolves.
pub async fn serve(config: &ServerConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServerError> {
    BoundServer::bind(config).await?.run(shutdown).await
}
