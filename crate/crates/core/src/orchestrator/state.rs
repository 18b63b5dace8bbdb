//! The run's single source of truth, persisted after every phase boundary
//! and every gate decision.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::output::PhaseOutput;
use crate::phase::PhaseId;
use crate::task::{Mode, ResearchTask};

use super::telemetry::PhaseStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    AwaitingDecision,
    Complete,
    Failed,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunStatus::Complete | RunStatus::Failed)
    }
}

/// A checkpoint waiting for a human decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingGate {
    /// Names the decision slot, e.g. `plan_formulation-2`.
    pub gate_id: String,
    pub phase: PhaseId,
    pub attempt: u32,
}

/// Outputs of the round before a refinement rewind, shown to the agents of
/// the next round.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PreviousRound {
    pub results_code: String,
    pub exp_results: String,
    pub interpretation: String,
    pub report: String,
    pub reviewer_response: String,
}

/// Where the current phase visit stands; used to build its telemetry row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Visit {
    pub attempts: u32,
    pub wall_time_secs: f64,
    /// Ledger length when the visit started.
    pub ledger_start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub task: ResearchTask,
    pub phase: PhaseId,
    pub outputs: BTreeMap<PhaseId, PhaseOutput>,
    /// Executions of each phase over the whole run.
    pub attempts: BTreeMap<PhaseId, u32>,
    pub telemetry: Vec<PhaseStats>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending: Option<PendingGate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous: Option<PreviousRound>,
    pub rewinds_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_phase: Option<PhaseId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default)]
    pub visit: Visit,
    /// Attempt number of a phase execution that started but has not
    /// finished; resume replays it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_flight: Option<u32>,
    /// Gateway ledger length at the last save; resume truncates to it.
    pub ledger_len: usize,
    /// Next unserved entry of a mock script, if the run uses one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_cursor: Option<usize>,
    /// Whether the final report passed the LaTeX check.
    #[serde(default)]
    pub report_compiled: bool,
}

impl RunState {
    pub fn new(run_id: impl Into<String>, task: ResearchTask) -> Self {
        Self {
            run_id: run_id.into(),
            task,
            phase: PhaseId::first(),
            outputs: BTreeMap::new(),
            attempts: BTreeMap::new(),
            telemetry: Vec::new(),
            status: RunStatus::Running,
            pending: None,
            previous: None,
            rewinds_used: 0,
            failed_phase: None,
            failure: None,
            visit: Visit::default(),
            in_flight: None,
            ledger_len: 0,
            mock_cursor: None,
            report_compiled: false,
        }
    }

    pub fn seed(&self) -> u64 {
        self.task.seed()
    }

    pub fn attempt(&self, phase: PhaseId) -> u32 {
        self.attempts.get(&phase).copied().unwrap_or(0)
    }

    pub fn output(&self, phase: PhaseId) -> Option<&PhaseOutput> {
        self.outputs.get(&phase)
    }

    /// Checks the structural invariants: every phase before the pointer has
    /// an output, and decisions are only awaited in co-pilot runs.
    pub fn check_invariants(&self) -> Result<(), String> {
        let until = if self.status == RunStatus::Complete { PhaseId::ALL.len() } else { self.phase.index() };
        if let Some(missing) = PhaseId::ALL[..until].iter().find(|p| !self.outputs.contains_key(p)) {
            return Err(format!("no output recorded for {missing}"));
        }
        if self.status == RunStatus::AwaitingDecision {
            if self.task.mode() != Mode::Copilot {
                return Err("an autonomous run cannot await a decision".into());
            }
            if self.pending.is_none() {
                return Err("awaiting a decision without a pending gate".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::Mode;

    #[test]
    fn round_trips_through_json() {
        let mut s = RunState::new("r1", ResearchTask::new("topic", Mode::Copilot, 3).unwrap());
        s.outputs.insert(PhaseId::LiteratureReview, PhaseOutput::Plan { text: "x".into() });
        s.phase = PhaseId::PlanFormulation;
        s.status = RunStatus::AwaitingDecision;
        s.pending = Some(PendingGate { gate_id: "g".into(), phase: PhaseId::LiteratureReview, attempt: 1 });
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<RunState>(&json).unwrap(), s);
        s.check_invariants().unwrap();
    }

    #[test]
    fn invariants() {
        let mut s = RunState::new("r", ResearchTask::new("t", Mode::Autonomous, 0).unwrap());
        s.check_invariants().unwrap();
        s.phase = PhaseId::DataPreparation;
        assert!(s.check_invariants().is_err());
        s.phase = PhaseId::LiteratureReview;
        s.status = RunStatus::AwaitingDecision;
        assert!(s.check_invariants().is_err());
    }
}
