//! Deterministic simulated robot.
//!
//! Skills execute in logical ticks. A goto moves the robot in straight-line
//! steps of at most `speedMetersPerTick`, reporting each step as a progress
//! delta. No wall clock is involved unless `tickMillis` asks for pacing.

use std::collections::BTreeMap;
use std::future::Future;
use std::time::Duration;

use aas_core::lifecycle::{CommandId, Details, Outcome};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::io::{AsyncRead, AsyncWrite, BufReader};
use tokio::net::TcpListener;

use crate::protocol::{read_message, write_message, BridgeError, BridgeMessage};

pub const DEFAULT_PORT: u16 = 7342;
pub const OUTSIDE_REGION_REASON: &str = "rejected: target outside reachable region";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Region {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.min_x <= x && x <= self.max_x && self.min_y <= y && y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "behavior", rename_all_fields = "camelCase", deny_unknown_fields)]
pub enum Behavior {
    AlwaysSucceed { duration_ticks: u32 },
    FailEveryNth { n: u32, duration_ticks: u32 },
    GotoKinematic { speed_meters_per_tick: f64, reachable_region: Region },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimRobotConfig {
    pub robot_name: String,
    pub pose: Pose,
    pub skills: BTreeMap<String, Behavior>,
    pub rng_seed: u64,
    /// Real-time pacing per tick; 0 runs as fast as possible.
    #[serde(default)]
    pub tick_millis: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid simulator config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid simulator config at skills.{skill}: {message}")]
    Invalid { skill: String, message: String },
}

impl SimRobotConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        for (skill, behavior) in &self.skills {
            let bad = |message: &str| {
                Err(ConfigError::Invalid {
                    skill: skill.clone(),
                    message: message.into(),
                })
            };
            match behavior {
                Behavior::AlwaysSucceed { duration_ticks } | Behavior::FailEveryNth { duration_ticks, .. }
                    if *duration_ticks < 1 =>
                {
                    return bad("durationTicks must be at least 1")
                }
                Behavior::FailEveryNth { n: 0, .. } => return bad("n must be at least 1"),
                Behavior::GotoKinematic {
                    speed_meters_per_tick,
                    reachable_region: r,
                } => {
                    if !(speed_meters_per_tick.is_finite() && *speed_meters_per_tick > 0.0) {
                        return bad("speedMetersPerTick must be positive");
                    }
                    if !(r.min_x <= r.max_x && r.min_y <= r.max_y) {
                        return bad("reachableRegion must have min <= max");
                    }
                }
                _ => {}
            }
        }
        if !(self.pose.x.is_finite() && self.pose.y.is_finite()) {
            return Err(ConfigError::Invalid {
                skill: String::new(),
                message: "pose must be finite".into(),
            });
        }
        Ok(())
    }
}

/// Robot state carried across commands and connections.
#[derive(Debug, Clone)]
pub struct SimRobot {
    config: SimRobotConfig,
    pose: Pose,
    invocations: BTreeMap<String, u64>,
}

fn target(params: &Details, key: &str) -> Option<f64> {
    params.get(key).and_then(Value::as_f64).filter(|v| v.is_finite())
}

impl SimRobot {
    pub fn new(config: SimRobotConfig) -> Self {
        Self {
            pose: config.pose,
            config,
            invocations: BTreeMap::new(),
        }
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn config(&self) -> &SimRobotConfig {
        &self.config
    }

    /// All messages the robot sends in reply to one Execute, in order.
    pub fn execute(&mut self, id: CommandId, skill: &str, params: &Details) -> Vec<BridgeMessage> {
        let mut out = vec![BridgeMessage::Started { command_id: id }];
        let invocation = {
            let n = self.invocations.entry(skill.to_string()).or_default();
            *n += 1;
            *n
        };
        let done = |outcome, details: Value| BridgeMessage::Done {
            command_id: id,
            outcome,
            details: serde_json::from_value(details).expect("object literal"),
        };
        let Some(behavior) = self.config.skills.get(skill) else {
            out.push(done(Outcome::Error, json!({"reason": format!("unknown skill '{skill}'")})));
            return out;
        };
        match behavior {
            Behavior::AlwaysSucceed { duration_ticks } => {
                out.push(done(Outcome::Success, json!({"ticks": duration_ticks})));
            }
            Behavior::FailEveryNth { n, duration_ticks } => {
                if invocation % u64::from(*n) == 0 {
                    out.push(done(
                        Outcome::Error,
                        json!({"reason": format!("scheduled failure on invocation {invocation}"), "ticks": duration_ticks}),
                    ));
                } else {
                    out.push(done(Outcome::Success, json!({"ticks": duration_ticks})));
                }
            }
            Behavior::GotoKinematic {
                speed_meters_per_tick,
                reachable_region,
            } => {
                let (Some(x), Some(y)) = (target(params, "x"), target(params, "y")) else {
                    out.push(done(Outcome::Error, json!({"reason": "rejected: goto needs numeric x and y"})));
                    return out;
                };
                if !reachable_region.contains(x, y) {
                    out.push(done(Outcome::Error, json!({"reason": OUTSIDE_REGION_REASON})));
                    return out;
                }
                let distance = (x - self.pose.x).hypot(y - self.pose.y);
                let ticks = (distance / speed_meters_per_tick).ceil() as u64;
                // deltas telescope over the clamped cumulative distance
                let mut covered = 0.0;
                for k in 1..=ticks {
                    let next = (k as f64 * speed_meters_per_tick).min(distance);
                    out.push(BridgeMessage::Progress {
                        command_id: id,
                        distance_delta_meters: next - covered,
                    });
                    covered = next;
                }
                self.pose = Pose { x, y };
                out.push(done(
                    Outcome::Success,
                    json!({"distanceMeters": distance, "ticks": ticks, "pose": {"x": x, "y": y}}),
                ));
            }
        }
        out
    }
}

/// Serves one dispatcher connection until it closes. Malformed or unexpected
/// inbound frames end the connection with an error.
pub async fn run_sim_robot<S>(robot: &mut SimRobot, stream: S) -> Result<(), BridgeError>
where
    S: AsyncRead + AsyncWrite + Unpin,
{
    let (reader, mut writer) = tokio::io::split(stream);
    let mut reader = BufReader::new(reader);
    let tick = Duration::from_millis(robot.config.tick_millis);
    while let Some(msg) = read_message(&mut reader).await? {
        let BridgeMessage::Execute {
            command_id,
            skill,
            params,
        } = msg
        else {
            return Err(BridgeError::MalformedFrame {
                position: 0,
                message: format!("robot only accepts EXECUTE, got {}", msg.type_name()),
            });
        };
        tracing::debug!(%command_id, %skill, "execute");
        for reply in robot.execute(command_id, &skill, &params) {
            if !tick.is_zero() && matches!(reply, BridgeMessage::Progress { .. } | BridgeMessage::Done { .. }) {
                tokio::time::sleep(tick).await;
            }
            write_message(&mut writer, &reply).await?;
        }
    }
    Ok(())
}

/// Accepts dispatcher connections one at a time until `shutdown` resolves.
pub async fn serve_sim(listener: TcpListener, config: SimRobotConfig, shutdown: impl Future<Output = ()>) {
    let mut robot = SimRobot::new(config);
    tokio::pin!(shutdown);
    loop {
        let accepted = tokio::select! {
            _ = &mut shutdown => return,
            accepted = listener.accept() => accepted,
        };
        match accepted {
            Ok((stream, peer)) => {
                tracing::info!(%peer, "dispatcher connected");
                let _ = stream.set_nodelay(true);
                tokio::select! {
                    _ = &mut shutdown => return,
                    result = run_sim_robot(&mut robot, stream) => match result {
                        Ok(()) => tracing::info!(%peer, "dispatcher disconnected"),
                        Err(e) => tracing::warn!(%peer, error = %e, "connection closed"),
                    },
                }
            }
            Err(e) => tracing::warn!(error = %e, "accept failed"),
        }
    }
}
