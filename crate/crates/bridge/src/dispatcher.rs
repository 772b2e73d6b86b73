//! Feeds pending commands to the robot one at a time and books the outcomes.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use aas_core::lifecycle::{CommandRegistry, Details, Outcome, SkillCommand};
use serde_json::Value;
use tokio::io::{AsyncRead, AsyncWrite, BufReader};
use tokio::net::TcpStream;
use tokio::sync::{mpsc, watch};

use crate::protocol::{read_message, write_message, BridgeError, BridgeMessage};

pub const DISCONNECTED_REASON: &str = "bridge disconnected";
pub const STOPPED_REASON: &str = "dispatcher stopped";

#[derive(Debug, Clone, Copy)]
pub struct DispatcherOptions {
    /// Idle delay between `take_next` polls.
    pub poll_interval: Duration,
}

impl Default for DispatcherOptions {
    fn default() -> Self {
        Self {
            poll_interval: Duration::from_millis(5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchExit {
    Shutdown,
    Disconnected,
}

type Inbound = mpsc::Receiver<Result<BridgeMessage, BridgeError>>;

fn spawn_reader<R: AsyncRead + Unpin + Send + 'static>(reader: R) -> Inbound {
    let (tx, rx) = mpsc::channel(64);
    tokio::spawn(async move {
        let mut reader = BufReader::new(reader);
        loop {
            let next = read_message(&mut reader).await;
            let stop = !matches!(next, Ok(Some(_)));
            let item = match next {
                Ok(Some(msg)) => Ok(msg),
                Ok(None) => Err(BridgeError::Disconnected),
                Err(e) => Err(e),
            };
            if tx.send(item).await.is_err() || stop {
                return;
            }
        }
    });
    rx
}

fn stopped(shutdown: &watch::Receiver<bool>) -> bool {
    *shutdown.borrow()
}

async fn wait_stop(shutdown: &mut watch::Receiver<bool>) {
    // a dropped sender counts as a stop request
    let _ = shutdown.wait_for(|s| *s).await;
}

fn finish(registry: &CommandRegistry, cmd: &SkillCommand, outcome: Outcome, mut details: Details, travelled: f64) {
    if travelled > 0.0 && !details.contains_key("distanceMeters") {
        details.insert("distanceMeters".into(), Value::from(travelled));
    }
    if let Err(e) = registry.complete(cmd.id, outcome, details) {
        tracing::error!(command = %cmd.id, error = %e, "completion rejected by registry");
    }
}

fn reason(text: &str) -> Details {
    let mut d = Details::new();
    d.insert("reason".into(), text.into());
    d
}

/// Runs until the connection drops or `shutdown` turns true. An in-flight
/// command is completed as an error when the connection is lost.
pub async fn run_dispatcher<S>(
    registry: Arc<CommandRegistry>,
    stream: S,
    mut shutdown: watch::Receiver<bool>,
    options: DispatcherOptions,
) -> DispatchExit
where
    S: AsyncRead + AsyncWrite + Send + 'static,
{
    let (reader, mut writer) = tokio::io::split(stream);
    let mut inbound = spawn_reader(reader);
    loop {
        if stopped(&shutdown) {
            return DispatchExit::Shutdown;
        }
        let Some(cmd) = registry.take_next() else {
            tokio::select! {
                _ = wait_stop(&mut shutdown) => return DispatchExit::Shutdown,
                _ = tokio::time::sleep(options.poll_interval) => continue,
                msg = inbound.recv() => match msg {
                    Some(Ok(msg)) => {
                        tracing::warn!(command = %msg.command_id(), kind = msg.type_name(), "unsolicited message ignored");
                        continue;
                    }
                    Some(Err(BridgeError::Disconnected)) | None => return DispatchExit::Disconnected,
                    Some(Err(e)) => {
                        tracing::warn!(error = %e, "bridge fault");
                        return DispatchExit::Disconnected;
                    }
                },
            }
        };

        let execute = BridgeMessage::Execute {
            command_id: cmd.id,
            skill: cmd.capability.clone(),
            params: cmd.params.clone(),
        };
        if let Err(e) = write_message(&mut writer, &execute).await {
            tracing::warn!(command = %cmd.id, error = %e, "send failed");
            finish(&registry, &cmd, Outcome::Error, reason(DISCONNECTED_REASON), 0.0);
            return DispatchExit::Disconnected;
        }

        let mut travelled = 0.0;
        loop {
            let msg = tokio::select! {
                _ = wait_stop(&mut shutdown) => {
                    finish(&registry, &cmd, Outcome::Error, reason(STOPPED_REASON), travelled);
                    return DispatchExit::Shutdown;
                }
                msg = inbound.recv() => msg,
            };
            match msg {
                Some(Ok(msg)) if msg.command_id() != cmd.id => {
                    tracing::warn!(command = %msg.command_id(), expected = %cmd.id, kind = msg.type_name(), "message for a command not in flight");
                }
                Some(Ok(BridgeMessage::Started { .. })) => tracing::debug!(command = %cmd.id, "started"),
                Some(Ok(BridgeMessage::Progress {
                    distance_delta_meters, ..
                })) => {
                    if distance_delta_meters.is_finite() && distance_delta_meters >= 0.0 {
                        travelled += distance_delta_meters;
                    } else {
                        tracing::warn!(command = %cmd.id, distance_delta_meters, "invalid progress ignored");
                    }
                }
                Some(Ok(BridgeMessage::Done { outcome, details, .. })) => {
                    finish(&registry, &cmd, outcome, details, travelled);
                    break;
                }
                Some(Ok(BridgeMessage::Execute { .. })) => {
                    tracing::warn!(command = %cmd.id, "robot sent EXECUTE; ignored");
                }
                Some(Err(e)) => {
                    if !matches!(e, BridgeError::Disconnected) {
                        tracing::warn!(command = %cmd.id, error = %e, "bridge fault");
                    }
                    finish(&registry, &cmd, Outcome::Error, reason(DISCONNECTED_REASON), travelled);
                    return DispatchExit::Disconnected;
                }
                None => {
                    finish(&registry, &cmd, Outcome::Error, reason(DISCONNECTED_REASON), travelled);
                    return DispatchExit::Disconnected;
                }
            }
        }
    }
}

/// Connects to the robot, dispatches, and reconnects after a drop, until shutdown.
pub async fn run_bridge_client(
    registry: Arc<CommandRegistry>,
    robot: SocketAddr,
    mut shutdown: watch::Receiver<bool>,
    options: DispatcherOptions,
) {
    let retry = Duration::from_millis(200);
    loop {
        if stopped(&shutdown) {
            return;
        }
        let stream = tokio::select! {
            _ = wait_stop(&mut shutdown) => return,
            s = TcpStream::connect(robot) => s,
        };
        match stream {
            Ok(stream) => {
                let _ = stream.set_nodelay(true);
                tracing::info!(%robot, "connected to robot");
                if run_dispatcher(registry.clone(), stream, shutdown.clone(), options).await == DispatchExit::Shutdown {
                    return;
                }
                tracing::warn!(%robot, "robot connection lost; reconnecting");
            }
            Err(e) => tracing::debug!(%robot, error = %e, "robot not reachable yet"),
        }
        tokio::select! {
            _ = wait_stop(&mut shutdown) => return,
            _ = tokio::time::sleep(retry) => {}
        }
    }
}
