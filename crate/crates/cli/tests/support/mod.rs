//! Running the binary and the services it starts.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::mpsc;
use std::time::Duration;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_robot-aas"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn models() -> PathBuf {
    fixtures().join("models")
}

/// Runs the binary to completion.
pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The single JSON error line a failed invocation leaves on stderr.
pub fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_else(|| panic!("empty stderr"));
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr line '{line}' is not JSON: {e}"))
}

/// A long-running subcommand, stopped with SIGTERM when dropped.
pub struct Service {
    child: Child,
    pub address: String,
}

impl Service {
    /// Starts `args` and waits for the `{"listening": addr}` announcement.
    pub fn start(args: &[&str]) -> Service {
        let mut child = bin()
            .arg("--json")
            .args(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("service starts");
        let stdout = child.stdout.take().unwrap();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut lines = BufReader::new(stdout).lines();
            if let Some(Ok(line)) = lines.next() {
                let _ = tx.send(line);
            }
            for _ in lines {}
        });
        let line = match rx.recv_timeout(Duration::from_secs(10)) {
            Ok(line) => line,
            Err(_) => {
                let _ = child.kill();
                panic!("{args:?} never announced its address");
            }
        };
        let v: serde_json::Value = serde_json::from_str(&line).expect("announcement is JSON");
        Service { child, address: v["listening"].as_str().unwrap().to_string() }
    }

    /// Sends SIGTERM and waits for a clean exit.
    pub fn stop(mut self) -> i32 {
        self.terminate()
    }

    fn terminate(&mut self) -> i32 {
        let _ = Command::new("kill").arg("-TERM").arg(self.child.id().to_string()).status();
        for _ in 0..500 {
            if let Ok(Some(status)) = self.child.try_wait() {
                return status.code().unwrap_or(-1);
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
        -1
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        if let Ok(None) = self.child.try_wait() {
            self.terminate();
        }
    }
}

/// Starts the simulator and a server bound to it, both on free ports.
pub fn start_stack(dir: &Path, environment: &Path, persist: Option<&Path>) -> (Service, Service) {
    // the demo config paces ticks in wall time; tests run unpaced
    let mut sim_config: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("sim.json")).unwrap()).unwrap();
    sim_config["tickMillis"] = serde_json::json!(0);
    let sim_path = dir.join("sim.json");
    std::fs::write(&sim_path, sim_config.to_string()).unwrap();
    let sim = Service::start(&["sim", "--config", sim_path.to_str().unwrap(), "--listen", "127.0.0.1:0"]);
    let mut config = serde_json::json!({
        "listenAddress": "127.0.0.1:0",
        "environmentSource": environment,
        "componentsDir": models(),
        "bridgeAddress": sim.address,
    });
    if let Some(p) = persist {
        config["telemetryPersistPath"] = serde_json::json!(p);
    }
    let path = dir.join("server.json");
    std::fs::write(&path, config.to_string()).unwrap();
    let server = Service::start(&["serve", "--config", path.to_str().unwrap()]);
    (sim, server)
}
