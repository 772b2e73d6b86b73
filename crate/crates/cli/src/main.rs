mod client;
mod failure;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use aas_bridge::sim::{serve_sim, SimRobotConfig, DEFAULT_PORT};
use aas_core::aasx::{read_aasx, write_aasx};
use aas_core::generate::{gen_component_aas, gen_system_aas, Generated};
use aas_core::ingest::{parse_component, parse_system, IngestError};
use aas_core::lifecycle::{CommandState, Details};
use aas_core::model::{resolve, validate, AasEnvironment, Node, SubmodelElement};
use aas_server::{read_components, read_environment, BoundServer, ServerConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use client::{parse_param, state_of, Client};
use failure::{Failure, USAGE};

#[derive(Parser)]
#[command(name = "robot-aas", version, about = "Generate, inspect, serve and command robot asset administration shells")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an .aasx data sheet from a component or system model.
    Generate(GenerateArgs),
    /// Print an .aasx environment, or the node at an idShort path.
    Inspect {
        file: PathBuf,
        /// idShort path such as Larry/Capabilities/goto.
        #[arg(long)]
        path: Option<String>,
    },
    /// Check a model or package against the structural invariants.
    Validate {
        /// .aasx, .component.json or .system.json
        file: PathBuf,
        /// Component models for a system document; defaults to its directory.
        #[arg(long)]
        components: Option<PathBuf>,
    },
    /// Run the AAS HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the simulated robot.
    Sim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = format!("127.0.0.1:{DEFAULT_PORT}"))]
        listen: String,
    },
    /// Talk to a running service.
    Client {
        #[arg(long, default_value = "127.0.0.1:8080")]
        server: String,
        #[command(subcommand)]
        action: ClientAction,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    #[arg(long)]
    component: Option<PathBuf>,
    #[arg(long)]
    system: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    source: Source,
    /// Directory of *.component.json files; required with --system.
    #[arg(long, requires = "system")]
    components: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ClientAction {
    /// Push a capability; prints the command id.
    Push {
        #[arg(long)]
        capability: String,
        /// key=value; values that parse as JSON are sent as JSON.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, Value)>,
    },
    Status { id: String },
    Output { id: String },
    Delete { id: String },
    /// Poll until the command succeeds, fails or disappears.
    Watch {
        id: String,
        /// Poll interval in milliseconds.
        #[arg(long, default_value_t = 200)]
        interval: u64,
        /// Give up after this many seconds.
        #[arg(long)]
        timeout: Option<u64>,
    },
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return Failure::new(USAGE, "UsageError", first).report();
        }
    };
    let verbose = matches!(cli.command, Command::Serve { .. } | Command::Sim { .. });
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(if verbose { "info" } else { "warn" }));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn run(cli: Cli) -> Outcome {
    let json = cli.json;
    match cli.command {
        Command::Generate(args) => generate(args, json),
        Command::Inspect { file, path } => inspect(&file, path.as_deref(), json),
        Command::Validate { file, components } => validate_file(&file, components.as_deref(), json),
        Command::Serve { config } => runtime()?.block_on(serve(&config, json)),
        Command::Sim { config, listen } => runtime()?.block_on(sim(&config, &listen, json)),
        Command::Client { server, action } => runtime()?.block_on(client(Client::new(&server), action, json)),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::io("starting runtime", e))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(format!("reading {}", path.display()), e))
}

fn ingest_failure(file: &Path, e: IngestError) -> Failure {
    let f = Failure::validation(e.code(), &e).with("file", file.display().to_string());
    match e.path() {
        Some(p) => f.with("path", p),
        None => f,
    }
}

fn generate(args: GenerateArgs, json: bool) -> Outcome {
    let Generated { env, report } = match (&args.source.component, &args.source.system) {
        (Some(file), _) => {
            let model = parse_component(&read_text(file)?).map_err(|e| ingest_failure(file, e))?;
            gen_component_aas(&model)
        }
        (None, Some(file)) => {
            let text = read_text(file)?;
            let dir = args.components.clone().or_else(|| file.parent().map(Path::to_path_buf)).unwrap_or_default();
            let set = read_components(&dir)?;
            let system = parse_system(&text, &set).map_err(|e| ingest_failure(file, e))?;
            gen_system_aas(&system, &set)
                .map_err(|e| Failure::validation("GenerateError", &e).with("file", file.display().to_string()))?
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    if let Some(v) = validate(&env).first() {
        return Err(Failure::validation("InvalidEnvironment", v).with("path", v.path.clone()));
    }
    let bytes = write_aasx(&env).map_err(|e| Failure::runtime(e.code(), &e))?;
    std::fs::write(&args.out, &bytes).map_err(|e| Failure::io(format!("writing {}", args.out.display()), e))?;
    if json {
        println!(
            "{}",
            json!({
                "out": args.out.display().to_string(),
                "shellId": report.shell_id,
                "submodels": report.submodels_emitted,
                "warnings": report.warnings,
                "bytes": bytes.len(),
            })
        );
    } else {
        println!("wrote {} ({} bytes)", args.out.display(), bytes.len());
        println!("shell {}", report.shell_id);
        println!("submodels: {}", report.submodels_emitted.join(", "));
        for w in &report.warnings {
            println!("warning: {w}");
        }
    }
    Ok(())
}

fn load_package(file: &Path) -> Result<AasEnvironment, Failure> {
    let bytes = std::fs::read(file).map_err(|e| Failure::io(format!("reading {}", file.display()), e))?;
    read_aasx(&bytes).map_err(|e| Failure::validation(e.code(), &e).with("file", file.display().to_string()))
}

fn print_tree(env: &AasEnvironment) {
    fn element(e: &SubmodelElement, depth: usize) {
        let pad = "  ".repeat(depth);
        match e {
            SubmodelElement::Property(p) => println!("{pad}{} = {} ({})", p.id_short, p.value, p.value_type),
            SubmodelElement::Capability(c) => {
                let params: Vec<String> = c
                    .params
                    .iter()
                    .map(|p| format!("{}{}: {}", p.name, if p.required { "" } else { "?" }, p.value_type))
                    .collect();
                println!("{pad}{}({}) [capability]", c.id_short, params.join(", "));
            }
            SubmodelElement::File(f) => println!("{pad}{} -> {} ({})", f.id_short, f.path, f.mime_type),
            other => println!("{pad}{} [{}]", other.id_short(), other.kind_name()),
        }
        for child in e.children() {
            element(child, depth + 1);
        }
    }
    for shell in &env.shells {
        println!("{} [{}] {}", shell.id_short, shell.asset_kind.as_str(), shell.id);
        for sm in env.submodels_of(shell) {
            println!("  {}", sm.id_short);
            for e in &sm.elements {
                element(e, 2);
            }
        }
    }
}

fn inspect(file: &Path, path: Option<&str>, json: bool) -> Outcome {
    let env = load_package(file)?;
    match path {
        Some(p) => {
            let node = resolve(&env, p).map_err(|e| Failure::validation("NotFound", &e).with("path", p))?;
            let value = match node {
                // a submodel is shown as its element list
                Node::Submodel(sm) => serde_json::to_value(&sm.elements),
                other => serde_json::to_value(other),
            }
            .expect("model serializes");
            if json {
                println!("{value}");
            } else {
                println!("{}", serde_json::to_string_pretty(&value).expect("value serializes"));
            }
        }
        None if json => println!("{}", serde_json::to_string(&env).expect("model serializes")),
        None => print_tree(&env),
    }
    Ok(())
}

fn validate_file(file: &Path, components: Option<&Path>, json: bool) -> Outcome {
    let env = read_environment(file, components)?;
    let violations = validate(&env);
    if json {
        println!("{}", json!({ "valid": violations.is_empty(), "violations": violations }));
    } else if violations.is_empty() {
        println!("valid: {} shell(s), {} submodel(s)", env.shells.len(), env.submodels.len());
    } else {
        for v in &violations {
            println!("{v}");
        }
    }
    match violations.first() {
        None => Ok(()),
        Some(v) => Err(Failure::validation("InvalidEnvironment", format!("{} violation(s)", violations.len()))
            .with("path", v.path.clone())),
    }
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn announce(what: &str, addr: std::net::SocketAddr, json: bool) {
    if json {
        println!("{}", json!({ "listening": addr.to_string(), "service": what }));
    } else {
        println!("{what} listening on {addr}");
    }
}

async fn serve(config: &Path, json: bool) -> Outcome {
    let config = ServerConfig::load(config)?;
    let server = BoundServer::bind(&config).await?;
    announce("aas-server", server.local_addr(), json);
    server.run(shutdown_signal()).await?;
    Ok(())
}

async fn sim(config: &Path, listen: &str, json: bool) -> Outcome {
    let text = read_text(config)?;
    let config = SimRobotConfig::from_json(&text)
        .map_err(|e| Failure::validation("ConfigError", &e).with("file", config.display().to_string()))?;
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|e| Failure::runtime("BindError", format!("cannot listen on {listen}: {e}")))?;
    let addr = listener.local_addr().map_err(|e| Failure::io("reading bound address", e))?;
    announce("sim-robot", addr, json);
    serve_sim(listener, config, shutdown_signal()).await;
    Ok(())
}

async fn client(client: Client, action: ClientAction, json: bool) -> Outcome {
    let print = |value: &Value, human: &str| {
        if json {
            println!("{value}");
        } else {
            println!("{human}");
        }
    };
    match action {
        ClientAction::Push { capability, params } => {
            let params: Details = params.into_iter().collect::<BTreeMap<_, _>>();
            let body = client.push(&capability, params).await?;
            let id = body["commandId"].as_str().unwrap_or_default().to_string();
            print(&body, &id);
            if state_of(&body)? == CommandState::Error {
                // rejected at push time; surface the reason
                let out = client.output(&id).await?;
                let reason = out["details"]["reason"].as_str().unwrap_or("rejected").to_string();
                return Err(Failure::validation("Rejected", reason).with("commandId", id));
            }
            Ok(())
        }
        ClientAction::Status { id } => {
            let body = client.operation("getStatus", json!({ "commandId": id })).await?;
            print(&body, body["state"].as_str().unwrap_or_default());
            Ok(())
        }
        ClientAction::Output { id } => {
            let body = client.output(&id).await?;
            let reason = body["details"]["reason"].as_str().map(str::to_string);
            let human = match (&body["outcome"], &reason) {
                (Value::String(o), Some(r)) if o == "error" => format!("error: {r}"),
                (o, _) => format!("{}: {}", o.as_str().unwrap_or_default(), body["details"]),
            };
            print(&body, &human);
            if body["outcome"] == "error" {
                return Err(Failure::validation("CommandFailed", reason.unwrap_or_default()).with("commandId", id));
            }
            Ok(())
        }
        ClientAction::Delete { id } => {
            let body = client.delete(&id).await?;
            print(&body, body["state"].as_str().unwrap_or_default());
            Ok(())
        }
        ClientAction::Watch { id, interval, timeout } => {
            let final_state = client
                .watch(&id, Duration::from_millis(interval), timeout.map(Duration::from_secs), |state| {
                    print(&json!({ "commandId": id, "state": state }), state.as_str())
                })
                .await?;
            match final_state {
                CommandState::Success => Ok(()),
                CommandState::Error => {
                    let out = client.output(&id).await?;
                    let reason = out["details"]["reason"].as_str().unwrap_or_default().to_string();
                    Err(Failure::validation("CommandFailed", reason).with("commandId", id))
                }
                _ => Err(Failure::validation("CommandDeleted", format!("{id} no longer exists")).with("commandId", id)),
            }
        }
    }
}
