//! Deterministic discrete-event simulation: scenario configuration, node
//! state, radio, mobility, the event loop and run metrics.

mod config;
mod engine;
mod metrics;
mod node;
mod radio;
mod trace;

pub use config::{Coverage, Mobility, Protocol, ScenarioConfig, TrafficFlow};
pub use engine::{initial_layout, run, run_with, AuditReport, RunOptions, RunOutput};
pub use metrics::{
    collect_metrics, DropReason, GroundTruth, InstanceOutcome, MetricsRecord, PacketRecord, RunRecords, SourceWindow,
};
pub use node::{initial_motion, mobility_step, Motion, NodeState};
pub use radio::{frame_lost, propagation_delay, receivers, SPEED_OF_LIGHT};
pub use trace::{write_trace_jsonl, TraceEvent};
