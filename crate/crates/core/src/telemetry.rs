//! Accumulated operational data of a robot system.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::lifecycle::Outcome;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SkillStats {
    /// Executions started.
    pub count: u64,
    pub success_count: u64,
    pub error_count: u64,
    /// Summed execution time of completed runs.
    pub total_duration_seconds: f64,
}

impl SkillStats {
    pub fn success_rate(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.success_count as f64 / self.count as f64
        }
    }

    pub fn mean_duration_seconds(&self) -> f64 {
        let completed = self.success_count + self.error_count;
        if completed == 0 {
            0.0
        } else {
            self.total_duration_seconds / completed as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TelemetryLedger {
    pub total_distance_meters: f64,
    /// Unix time in seconds when the ledger was first opened.
    pub started_at_wall_clock: f64,
    pub per_skill: BTreeMap<String, SkillStats>,
}

pub fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("malformed telemetry snapshot: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported telemetry snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("telemetry snapshot violates ledger invariants: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Snapshot {
    format_version: u32,
    #[serde(flatten)]
    ledger: TelemetryLedger,
}

impl TelemetryLedger {
    pub fn new(started_at: SystemTime) -> Self {
        Self {
            total_distance_meters: 0.0,
            started_at_wall_clock: unix_seconds(started_at),
            per_skill: BTreeMap::new(),
        }
    }

    pub fn record_started(&mut self, skill: &str) {
        self.per_skill.entry(skill.to_string()).or_default().count += 1;
    }

    pub fn record_completed(
        &mut self,
        skill: &str,
        outcome: Outcome,
        duration_seconds: f64,
        distance_meters: Option<f64>,
    ) {
        let stats = self.per_skill.entry(skill.to_string()).or_default();
        match outcome {
            Outcome::Success => stats.success_count += 1,
            Outcome::Error => stats.error_count += 1,
        }
        stats.total_duration_seconds += duration_seconds.max(0.0);
        if let Some(d) = distance_meters.filter(|d| d.is_finite() && *d >= 0.0) {
            self.total_distance_meters += d;
        }
    }

    pub fn kilometers_travelled(&self) -> f64 {
        self.total_distance_meters / 1000.0
    }

    pub fn hours_of_operation(&self, now: SystemTime) -> f64 {
        ((unix_seconds(now) - self.started_at_wall_clock) / 3600.0).max(0.0)
    }

    pub fn stats(&self, skill: &str) -> Option<&SkillStats> {
        self.per_skill.get(skill)
    }

    /// Counters non-negative by type; checks the remaining invariants.
    pub fn check(&self) -> Result<(), String> {
        if !(self.total_distance_meters.is_finite() && self.total_distance_meters >= 0.0) {
            return Err("totalDistanceMeters must be finite and non-negative".into());
        }
        for (skill, s) in &self.per_skill {
            if s.success_count + s.error_count > s.count {
                return Err(format!("{skill}: successCount + errorCount exceeds count"));
            }
            if !(s.total_duration_seconds.is_finite() && s.total_duration_seconds >= 0.0) {
                return Err(format!("{skill}: totalDurationSeconds must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn to_snapshot_json(&self) -> String {
        let snapshot = Snapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            ledger: self.clone(),
        };
        let mut out = serde_json::to_string_pretty(&snapshot).expect("ledger serializes");
        out.push('\n');
        out
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self, SnapshotError> {
        let snapshot: Snapshot = serde_json::from_str(text)?;
        if snapshot.format_version != SNAPSHOT_FORMAT_VERSION {
            return Err(SnapshotError::UnsupportedVersion(snapshot.format_version));
        }
        snapshot.ledger.check().map_err(SnapshotError::Invalid)?;
        Ok(snapshot.ledger)
    }
}
