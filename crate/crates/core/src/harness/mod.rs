//! Two-node scenario driver.
//!
//! Node A initiates, node B responds. Each cycle senses mismatches, runs the
//! fast path or the slow path (pool lookup or synthesis, then negotiation and
//! a hot swap on both nodes), checks quotas and appends one [`CycleRecord`].

mod config;
mod log;
mod negotiation;
mod scenario;

pub use config::{
    FaultSection, LatencySection, PolicySection, PoolSection, PsiSection, QuotaSection,
    ScenarioConfig, ShockSection, SimSection, SynthSection,
};
pub use log::{
    format_fixed, read_log_csv, write_records_csv, CycleRecord, EventLog, RunMeta, LOG_HEADER,
    SCHEMA_VERSION,
};
pub use negotiation::{
    negotiate, AbortReason, MessageKind, Negotiation, NegotiationMessage, NegotiationResult,
};
pub use scenario::{context_of, run_scenario, ScenarioRun};
