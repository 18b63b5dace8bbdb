//! Drives a run through the phases, persisting state so it can be resumed,
//! and pauses at human checkpoints in co-pilot mode.

pub mod demo;
pub mod events;
pub mod gate;
pub mod pipeline;
pub mod refine;
pub mod setup;
pub mod state;
pub mod store;
pub mod telemetry;

pub use events::{read_events, Event, EventKind, EventLog};
pub use gate::{submit_decision, DecisionBody, DecisionSource, GateError, HumanDecision, Mailbox, Prompter, Scripted, Submitted};
pub use pipeline::{create_run, resume, run_pipeline, PipelineError, RunSpec};
pub use state::{RunState, RunStatus};
pub use store::{RunDir, RunStore, StoreError};
pub use telemetry::PhaseStats;
