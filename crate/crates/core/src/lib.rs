//! Asset administration shell model, generation, packaging and command lifecycle.

pub mod aasx;
pub mod generate;
pub mod ingest;
pub mod lifecycle;
pub mod model;
pub mod telemetry;

pub use lifecycle::{CommandId, CommandRegistry, CommandState, Outcome};
pub use model::AasEnvironment;
pub use telemetry::TelemetryLedger;
