//! Command registry for skill-level commanding.
//!
//! Every pushed capability instance becomes a [`SkillCommand`] with a fresh
//! [`CommandId`]. Commands move through a five-state lifecycle:
//!
//! ```text
//! push ──> Pending ──take_next──> Executing ──complete──> Success | Error
//!   │         │                                              │
//!   │         └──────────────delete──────────> Deleted <─────┘ delete
//!   └─(rejected)──> Error
//! ```
//!
//! Rejection is a state, not a fault: a push whose capability is unknown or
//! whose parameters break the declared schema lands directly in `Error` with a
//! `rejected: ` reason. Unknown and deleted identifiers are indistinguishable
//! and both report `Deleted`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::generate::CAPABILITIES;
use crate::model::{AasEnvironment, CapabilityDecl, Constraint, ParamSpec, SubmodelElement, ValueType};
use crate::telemetry::TelemetryLedger;

pub const REJECTED_PREFIX: &str = "rejected: ";

/// Parameter and result maps.
pub type Details = BTreeMap<String, Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommandId(u64);

impl CommandId {
    pub fn new(counter: u64) -> Self {
        Self(counter)
    }

    pub fn counter(self) -> u64 {
        self.0
    }
}

impl fmt::Display for CommandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cmd-{:010}", self.0)
    }
}

impl FromStr for CommandId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix("cmd-")
            .filter(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|digits| digits.parse().ok())
            .map(CommandId)
            .ok_or_else(|| format!("'{s}' is not a command identifier"))
    }
}

impl Serialize for CommandId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CommandId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandState {
    Pending,
    Executing,
    Success,
    Error,
    Deleted,
}

impl CommandState {
    pub const ALL: [CommandState; 5] = [
        CommandState::Pending,
        CommandState::Executing,
        CommandState::Success,
        CommandState::Error,
        CommandState::Deleted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommandState::Pending => "pending",
            CommandState::Executing => "executing",
            CommandState::Success => "success",
            CommandState::Error => "error",
            CommandState::Deleted => "deleted",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, CommandState::Success | CommandState::Error | CommandState::Deleted)
    }

    /// The complete transition table; push-time creation is handled separately.
    pub fn can_transition_to(self, to: CommandState) -> bool {
        use CommandState::*;
        matches!(
            (self, to),
            (Pending, Executing)
                | (Executing, Success)
                | (Executing, Error)
                | (Pending, Deleted)
                | (Success, Deleted)
                | (Error, Deleted)
        )
    }
}

impl fmt::Display for CommandState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CommandState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown state '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Error,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Error => "error",
        }
    }

    fn state(self) -> CommandState {
        match self {
            Outcome::Success => CommandState::Success,
            Outcome::Error => CommandState::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandResult {
    pub outcome: Outcome,
    pub details: Details,
}

impl CommandResult {
    pub fn reason(&self) -> Option<&str> {
        self.details.get("reason").and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillCommand {
    pub id: CommandId,
    pub capability: String,
    pub params: Details,
    pub state: CommandState,
    pub result: Option<CommandResult>,
    pub pushed_at: Duration,
    pub started_at: Option<Duration>,
    pub finished_at: Option<Duration>,
}

/// Which schema clause a rejected push violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RejectionClause {
    UnknownCapability,
    Required,
    Type,
    Range,
    Enumeration,
    UnknownParameter,
}

impl RejectionClause {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectionClause::UnknownCapability => "unknownCapability",
            RejectionClause::Required => "required",
            RejectionClause::Type => "type",
            RejectionClause::Range => "range",
            RejectionClause::Enumeration => "enum",
            RejectionClause::UnknownParameter => "unknownParameter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub clause: RejectionClause,
    /// Always starts with [`REJECTED_PREFIX`].
    pub reason: String,
}

fn json_kind(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_i64() || n.is_u64() => "integer",
        Value::Number(_) => "decimal",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn type_matches(value_type: ValueType, value: &Value) -> bool {
    match value_type {
        ValueType::String => value.is_string(),
        ValueType::Integer => value.is_i64(),
        ValueType::Decimal => value.as_f64().is_some_and(f64::is_finite),
        ValueType::Boolean => value.is_boolean(),
    }
}

/// Parameter schemas of every commandable capability.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CapabilityCatalog {
    capabilities: BTreeMap<String, Vec<ParamSpec>>,
}

impl CapabilityCatalog {
    pub fn from_decls<'a>(decls: impl IntoIterator<Item = &'a CapabilityDecl>) -> Self {
        Self {
            capabilities: decls
                .into_iter()
                .map(|d| (d.id_short.clone(), d.params.clone()))
                .collect(),
        }
    }

    /// Capabilities of the system shell, or of the first shell when there is no system.
    pub fn from_environment(env: &AasEnvironment) -> Self {
        let Some(shell) = env.system_shell().or_else(|| env.shells.first()) else {
            return Self::default();
        };
        let decls = env
            .shell_submodel(shell, CAPABILITIES)
            .into_iter()
            .flat_map(|s| s.elements.iter())
            .filter_map(|e| match e {
                SubmodelElement::Capability(c) => Some(c),
                _ => None,
            });
        Self::from_decls(decls)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.capabilities.keys().map(String::as_str)
    }

    pub fn params(&self, capability: &str) -> Option<&[ParamSpec]> {
        self.capabilities.get(capability).map(Vec::as_slice)
    }

    /// Checks a push against the declared schema.
    pub fn check(&self, capability: &str, params: &Details) -> Result<(), Rejection> {
        let reject = |clause, message: String| Rejection {
            clause,
            reason: format!("{REJECTED_PREFIX}{message}"),
        };
        let specs = self.params(capability).ok_or_else(|| {
            reject(
                RejectionClause::UnknownCapability,
                format!("unknown capability '{capability}'"),
            )
        })?;
        for spec in specs {
            let name = &spec.name;
            let Some(value) = params.get(name) else {
                if spec.required {
                    return Err(reject(
                        RejectionClause::Required,
                        format!("missing required parameter '{name}'"),
                    ));
                }
                continue;
            };
            if !type_matches(spec.value_type, value) {
                return Err(reject(
                    RejectionClause::Type,
                    format!(
                        "parameter '{name}' expects {}, got {}",
                        spec.value_type,
                        json_kind(value)
                    ),
                ));
            }
            match &spec.constraint {
                Some(Constraint::Range { lo, hi }) => {
                    let v = value.as_f64().unwrap_or(f64::NAN);
                    if !(*lo <= v && v <= *hi) {
                        return Err(reject(
                            RejectionClause::Range,
                            format!("parameter '{name}' = {value} is outside range [{lo}, {hi}]"),
                        ));
                    }
                }
                Some(Constraint::Enumeration(allowed)) => {
                    let v = value.as_str().unwrap_or_default();
                    if !allowed.iter().any(|a| a == v) {
                        return Err(reject(
                            RejectionClause::Enumeration,
                            format!(
                                "parameter '{name}' value '{v}' is not in enumeration [{}]",
                                allowed.join(", ")
                            ),
                        ));
                    }
                }
                None => {}
            }
        }
        if let Some(unknown) = params.keys().find(|k| !specs.iter().any(|s| &s.name == *k)) {
            return Err(reject(
                RejectionClause::UnknownParameter,
                format!("unknown parameter '{unknown}' for capability '{capability}'"),
            ));
        }
        Ok(())
    }
}

/// Time source for command timestamps and operating hours.
pub trait Clock: Send + Sync {
    /// Monotonic time since the clock was created.
    fn elapsed(&self) -> Duration;
    fn wall(&self) -> SystemTime;
}

#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    fn wall(&self) -> SystemTime {
        SystemTime::now()
    }
}

/// Clock advanced by hand, for deterministic tests.
#[derive(Debug)]
pub struct ManualClock {
    now: Mutex<Duration>,
    wall_origin: SystemTime,
}

impl ManualClock {
    pub fn new(wall_origin: SystemTime) -> Self {
        Self {
            now: Mutex::new(Duration::ZERO),
            wall_origin,
        }
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap_or_else(|e| e.into_inner()) += by;
    }
}

impl Clock for ManualClock {
    fn elapsed(&self) -> Duration {
        *self.now.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn wall(&self) -> SystemTime {
        self.wall_origin + self.elapsed()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LifecycleError {
    #[error("output not available while the command is {0}")]
    OutputNotAvailable(CommandState),
    #[error("command is unknown or deleted")]
    CommandUnknown,
    #[error("an executing command cannot be deleted")]
    CannotDeleteExecuting,
    #[error("illegal transition from {0}")]
    IllegalTransition(CommandState),
}

impl LifecycleError {
    pub fn code(&self) -> &'static str {
        match self {
            LifecycleError::OutputNotAvailable(_) => "OutputNotAvailable",
            LifecycleError::CommandUnknown => "CommandUnknown",
            LifecycleError::CannotDeleteExecuting => "CannotDeleteExecuting",
            LifecycleError::IllegalTransition(_) => "IllegalTransition",
        }
    }
}

/// One observed state change; `from` is `None` for creation by push.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TransitionRecord {
    pub command_id: CommandId,
    pub capability: String,
    pub from: Option<CommandState>,
    pub to: CommandState,
}

#[derive(Debug)]
struct Inner {
    last_id: u64,
    commands: BTreeMap<CommandId, SkillCommand>,
    queue: VecDeque<CommandId>,
    ledger: TelemetryLedger,
    log: Vec<TransitionRecord>,
}

impl Inner {
    fn record(&mut self, cmd: &SkillCommand, from: Option<CommandState>) {
        self.log.push(TransitionRecord {
            command_id: cmd.id,
            capability: cmd.capability.clone(),
            from,
            to: cmd.state,
        });
    }
}

/// Linearizable command registry shared by request handlers and the dispatcher.
pub struct CommandRegistry {
    catalog: CapabilityCatalog,
    clock: Arc<dyn Clock>,
    inner: Mutex<Inner>,
}

impl fmt::Debug for CommandRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CommandRegistry")
            .field("catalog", &self.catalog)
            .finish_non_exhaustive()
    }
}

impl CommandRegistry {
    pub fn new(catalog: CapabilityCatalog) -> Self {
        Self::with_clock(catalog, Arc::new(SystemClock::new()), None)
    }

    /// `ledger` continues a previously persisted ledger; `None` opens a fresh one.
    pub fn with_clock(
        catalog: CapabilityCatalog,
        clock: Arc<dyn Clock>,
        ledger: Option<TelemetryLedger>,
    ) -> Self {
        let ledger = ledger.unwrap_or_else(|| TelemetryLedger::new(clock.wall()));
        Self {
            catalog,
            clock,
            inner: Mutex::new(Inner {
                last_id: 0,
                commands: BTreeMap::new(),
                queue: VecDeque::new(),
                ledger,
                log: Vec::new(),
            }),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn catalog(&self) -> &CapabilityCatalog {
        &self.catalog
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Creates a command; it is `Pending` when accepted and `Error` when rejected.
    pub fn push(&self, capability: &str, params: Details) -> CommandId {
        let verdict = self.catalog.check(capability, &params);
        let now = self.clock.elapsed();
        let mut inner = self.lock();
        inner.last_id += 1;
        let id = CommandId(inner.last_id);
        let mut cmd = SkillCommand {
            id,
            capability: capability.to_string(),
            params,
            state: CommandState::Pending,
            result: None,
            pushed_at: now,
            started_at: None,
            finished_at: None,
        };
        match verdict {
            Ok(()) => inner.queue.push_back(id),
            Err(rejection) => {
                cmd.state = CommandState::Error;
                cmd.finished_at = Some(now);
                let mut details = Details::new();
                details.insert("reason".into(), rejection.reason.into());
                details.insert("clause".into(), rejection.clause.as_str().into());
                cmd.result = Some(CommandResult {
                    outcome: Outcome::Error,
                    details,
                });
            }
        }
        inner.record(&cmd, None);
        inner.commands.insert(id, cmd);
        id
    }

    pub fn get_status(&self, id: CommandId) -> CommandState {
        self.lock()
            .commands
            .get(&id)
            .map_or(CommandState::Deleted, |c| c.state)
    }

    pub fn get_output(&self, id: CommandId) -> Result<CommandResult, LifecycleError> {
        let inner = self.lock();
        let cmd = inner.commands.get(&id).ok_or(LifecycleError::CommandUnknown)?;
        cmd.result
            .clone()
            .ok_or(LifecycleError::OutputNotAvailable(cmd.state))
    }

    /// Removes a command before execution or after completion. Idempotent.
    pub fn delete(&self, id: CommandId) -> Result<CommandState, LifecycleError> {
        let mut inner = self.lock();
        let Some(cmd) = inner.commands.get(&id) else {
            return Ok(CommandState::Deleted);
        };
        if cmd.state == CommandState::Executing {
            return Err(LifecycleError::CannotDeleteExecuting);
        }
        let mut cmd = inner.commands.remove(&id).expect("present above");
        if cmd.state == CommandState::Pending {
            inner.queue.retain(|q| *q != id);
        }
        let from = cmd.state;
        cmd.state = CommandState::Deleted;
        inner.record(&cmd, Some(from));
        Ok(CommandState::Deleted)
    }

    /// Moves the oldest pending command to `Executing` and returns it.
    pub fn take_next(&self) -> Option<SkillCommand> {
        let now = self.clock.elapsed();
        let mut inner = self.lock();
        let id = inner.queue.pop_front()?;
        let cmd = inner.commands.get_mut(&id).expect("queued commands exist");
        cmd.state = CommandState::Executing;
        cmd.started_at = Some(now);
        let snapshot = cmd.clone();
        inner.ledger.record_started(&snapshot.capability);
        inner.record(&snapshot, Some(CommandState::Pending));
        Some(snapshot)
    }

    /// Finishes an executing command and books it into the ledger.
    pub fn complete(&self, id: CommandId, outcome: Outcome, mut details: Details) -> Result<(), LifecycleError> {
        let now = self.clock.elapsed();
        let mut inner = self.lock();
        let state = inner
            .commands
            .get(&id)
            .map_or(CommandState::Deleted, |c| c.state);
        if state != CommandState::Executing {
            return Err(LifecycleError::IllegalTransition(state));
        }
        if outcome == Outcome::Error && !details.contains_key("reason") {
            details.insert("reason".into(), "unspecified error".into());
        }
        let distance = details.get("distanceMeters").and_then(Value::as_f64);
        let cmd = inner.commands.get_mut(&id).expect("state checked above");
        cmd.state = outcome.state();
        cmd.finished_at = Some(now);
        cmd.result = Some(CommandResult { outcome, details });
        let duration = now.saturating_sub(cmd.started_at.unwrap_or(now));
        let snapshot = cmd.clone();
        inner
            .ledger
            .record_completed(&snapshot.capability, outcome, duration.as_secs_f64(), distance);
        inner.record(&snapshot, Some(CommandState::Executing));
        Ok(())
    }

    pub fn command(&self, id: CommandId) -> Option<SkillCommand> {
        self.lock().commands.get(&id).cloned()
    }

    /// Live commands in id order.
    pub fn commands(&self) -> Vec<SkillCommand> {
        self.lock().commands.values().cloned().collect()
    }

    pub fn pending_count(&self) -> usize {
        self.lock().queue.len()
    }

    pub fn ledger(&self) -> TelemetryLedger {
        self.lock().ledger.clone()
    }

    pub fn transitions(&self) -> Vec<TransitionRecord> {
        self.lock().log.clone()
    }
}
