use std::path::Path;
use std::time::Duration;

use aas_core::lifecycle::{Details, Outcome};
use aas_core::TelemetryLedger;
use aas_server::{load_ledger, persist_ledger, BoundServer, ServerConfig, ServerError};
use serde_json::json;
use tokio::sync::oneshot;

fn models() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/models")
}

fn config(dir: &Path, listen: &str) -> ServerConfig {
    let text = json!({
        "listenAddress": listen,
        "environmentSource": models().join("Larry.system.json"),
        "componentsDir": models(),
        "bridgeAddress": "127.0.0.1:9",
        "telemetryPersistPath": dir.join("telemetry.json"),
    });
    ServerConfig::from_json(&text.to_string(), dir).unwrap()
}

#[tokio::test]
async fn ledger_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "127.0.0.1:0");

    let server = BoundServer::bind(&cfg).await.unwrap();
    let registry = server.state().registry().clone();
    let id = registry.push("goto", serde_json::from_value(json!({"x": 1, "y": 1})).unwrap());
    registry.take_next().unwrap();
    let mut details = Details::new();
    details.insert("distanceMeters".into(), json!(2.5));
    registry.complete(id, Outcome::Success, details).unwrap();
    let before = registry.ledger();

    let (tx, rx) = oneshot::channel::<()>();
    let running = tokio::spawn(server.run(async move {
        let _ = rx.await;
    }));
    tokio::time::sleep(Duration::from_millis(50)).await;
    tx.send(()).unwrap();
    running.await.unwrap().unwrap();

    let stored = load_ledger(&dir.path().join("telemetry.json")).unwrap().unwrap();
    assert_eq!(stored, before);

    let again = BoundServer::bind(&cfg).await.unwrap();
    assert_eq!(again.state().registry().ledger(), before);
}

#[test]
fn persist_is_atomic_replace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.json");
    std::fs::write(&path, "old").unwrap();
    let ledger = TelemetryLedger::new(std::time::UNIX_EPOCH);
    persist_ledger(&ledger, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), ledger.to_snapshot_json());
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1, "temporary file left behind");
}

#[tokio::test]
async fn corrupt_snapshot_aborts_startup() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("telemetry.json"), "{\"formatVersion\": 1}").unwrap();
    let err = BoundServer::bind(&config(dir.path(), "127.0.0.1:0")).await.err().unwrap();
    assert!(matches!(err, ServerError::Telemetry { .. }), "{err}");
}

#[tokio::test]
async fn busy_port_is_a_bind_error() {
    let dir = tempfile::tempdir().unwrap();
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = holder.local_addr().unwrap().to_string();
    let err = BoundServer::bind(&config(dir.path(), &addr)).await.err().unwrap();
    assert!(matches!(err, ServerError::Bind { .. }), "{err}");
    assert!(!err.is_validation());
}

#[test]
fn environment_sources() {
    let env = aas_server::load_environment(&models().join("ComponentWebots.component.json"), None).unwrap();
    assert_eq!(env.shells[0].id_short, "ComponentWebots");
    let err = aas_server::load_environment(&models().join("Larry.txt"), None).unwrap_err();
    assert!(err.is_validation());
}
