//! The phase driver: runs the seven phases in order, gates them in co-pilot
//! mode, loops back on refinement decisions, and saves state at every
//! boundary.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::agents::dialogue::{data_preparation, plan_formulation, results_interpretation};
use crate::agents::lit_review::literature_review;
use crate::config::Config;
use crate::context::{PhaseCtx, PhaseError};
use crate::gateway::truncate_tail;
use crate::mle::{running_experiments, ScoringMode, SolverInputs};
use crate::output::{render_review, ExperimentOutput, PhaseOutput, RefinementDecision};
use crate::paper::{report_writing, ReportInputs};
use crate::phase::PhaseId;
use crate::prompts::{self, fill};
use crate::task::{Mode, ResearchTask};

use super::events::{Event, EventKind, EventLog};
use super::gate::{read_decision, DecisionSource, GateError, GateRequest, HumanDecision};
use super::refine::{render_reviews, report_refinement};
use super::setup::{build_services, HeldOutSpec, RunServices, SetupError, HELD_OUT_FILE, TRAIN_NOTE};
use super::state::{PendingGate, PreviousRound, RunState, RunStatus, Visit};
use super::store::{new_run_id, FileTranscript, RunDir, RunStore, StoreError};
use super::telemetry::PhaseStats;

/// Characters of phase output shown at a checkpoint.
const GATE_SUMMARY_CHARS: usize = 4_000;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error("checkpoint: {0}")]
    Gate(GateError),
    #[error("invalid run request: {0}")]
    Invalid(String),
    #[error("run directory: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything needed to start a run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub run_id: Option<String>,
    pub task: ResearchTask,
    pub config: Config,
    /// A script file, or a directory with `script.json` plus fixtures.
    pub mock_script: Option<std::path::PathBuf>,
    pub held_out: Option<HeldOutSpec>,
}

impl RunSpec {
    pub fn new(task: ResearchTask, config: Config) -> Self {
        Self { run_id: None, task, config, mock_script: None, held_out: None }
    }
}

fn copy_mock(src: &Path, dest: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dest)?;
    if src.is_dir() {
        for entry in std::fs::read_dir(src)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                std::fs::copy(entry.path(), dest.join(entry.file_name()))?;
            }
        }
    } else {
        std::fs::copy(src, dest.join("script.json"))?;
    }
    Ok(())
}

/// Creates the run directory and its initial state.
pub fn create_run(store: &RunStore, spec: RunSpec) -> Result<RunDir, PipelineError> {
    spec.config.validate().map_err(|e| PipelineError::Invalid(e.to_string()))?;
    let mut task = spec.task;
    if spec.held_out.is_some() {
        for phase in [PhaseId::DataPreparation, PhaseId::RunningExperiments] {
            task.add_notes(phase, [TRAIN_NOTE.to_string()]);
        }
    }
    if let Some(src) = &spec.mock_script {
        // fail before anything is written
        crate::gateway::mock::ScriptedProvider::load(src).map_err(SetupError::from)?;
    }
    let run_id = spec.run_id.unwrap_or_else(new_run_id);
    let dir = store.create(&run_id, &spec.config, &task)?;
    if let Some(src) = &spec.mock_script {
        copy_mock(src, &dir.mock_dir())?;
    }
    if let Some(h) = &spec.held_out {
        std::fs::create_dir_all(dir.heldout_dir())?;
        let text = serde_json::to_string(h).map_err(std::io::Error::other)?;
        std::fs::write(dir.heldout_dir().join(HELD_OUT_FILE), text)?;
    }
    let state = RunState::new(&run_id, task.clone());
    dir.save_state(&state)?;
    let mut events = EventLog::open(dir.events_path(), &run_id)?;
    events.append(
        EventKind::RunStarted,
        json!({"topic": task.topic(), "mode": task.mode(), "seed": task.seed()}),
    )?;
    Ok(dir)
}

/// Creates a run and drives it until it finishes or stops at a checkpoint
/// the decision source cannot answer.
pub fn run_pipeline(
    store: &RunStore,
    spec: RunSpec,
    gate: &mut dyn DecisionSource,
    observer: &mut dyn FnMut(&Event),
) -> Result<(RunDir, RunState), PipelineError> {
    let dir = create_run(store, spec)?;
    let state = drive(&dir, gate, observer)?;
    Ok((dir, state))
}

/// Continues a saved run. A finished run is returned unchanged.
pub fn resume(
    store: &RunStore,
    run_id: &str,
    gate: &mut dyn DecisionSource,
    observer: &mut dyn FnMut(&Event),
) -> Result<RunState, PipelineError> {
    let dir = store.open(run_id)?;
    let state = dir.load_state()?;
    if state.status.is_terminal() {
        return Ok(state);
    }
    let mut events = EventLog::open(dir.events_path(), run_id)?;
    let e = events.append(EventKind::RunResumed, json!({"phase": state.phase, "status": state.status}))?;
    observer(&e);
    drive(&dir, gate, observer)
}

/// Runs the saved state of `dir` forward.
pub fn drive(
    dir: &RunDir,
    gate: &mut dyn DecisionSource,
    observer: &mut dyn FnMut(&Event),
) -> Result<RunState, PipelineError> {
    let mut state = dir.load_state()?;
    if state.status.is_terminal() {
        return Ok(state);
    }
    let config = dir.config()?;
    let mut ledger = dir.load_ledger()?;
    ledger.truncate(state.ledger_len);
    let rs = build_services(dir, &config, state.seed(), ledger)?;
    if let Some(mock) = &rs.mock {
        mock.set_cursor(state.mock_cursor.unwrap_or(0));
    }
    if let Some(attempt) = state.in_flight.take() {
        // the process stopped mid-phase: replay that execution from its start
        state.attempts.insert(state.phase, attempt - 1);
        state.visit.attempts = state.visit.attempts.saturating_sub(1);
        dir.truncate_transcript(state.phase, attempt)?;
    }
    let mut driver = Driver {
        dir,
        events: EventLog::open(dir.events_path(), dir.run_id())?,
        transcript: FileTranscript::new(dir.transcripts()),
        config,
        state,
        rs,
        observer,
    };
    driver.run(gate)
}

struct Driver<'a> {
    dir: &'a RunDir,
    config: Config,
    state: RunState,
    rs: RunServices,
    events: EventLog,
    transcript: FileTranscript,
    observer: &'a mut dyn FnMut(&Event),
}

impl Driver<'_> {
    fn emit(&mut self, kind: EventKind, payload: serde_json::Value) -> Result<(), PipelineError> {
        let e = self.events.append(kind, payload)?;
        (self.observer)(&e);
        Ok(())
    }

    fn save(&mut self) -> Result<(), PipelineError> {
        let gw = &self.rs.services.gateway;
        self.state.ledger_len = gw.ledger_len();
        self.state.mock_cursor = self.rs.mock.as_ref().map(|m| m.cursor());
        self.dir.save_ledger(&gw.ledger())?;
        self.dir.save_state(&self.state)?;
        Ok(())
    }

    fn run(&mut self, gate: &mut dyn DecisionSource) -> Result<RunState, PipelineError> {
        loop {
            match self.state.status {
                RunStatus::Complete | RunStatus::Failed => return Ok(self.state.clone()),
                RunStatus::AwaitingDecision => {
                    if !self.await_decision(gate)? {
                        return Ok(self.state.clone());
                    }
                }
                RunStatus::Running => self.run_phase()?,
            }
        }
    }

    /// One visit of the current phase: up to `1 + phase_retries` executions.
    fn run_phase(&mut self) -> Result<(), PipelineError> {
        let phase = self.state.phase;
        if self.state.visit.attempts == 0 {
            self.state.visit = Visit { attempts: 0, wall_time_secs: 0.0, ledger_start: self.rs.services.gateway.ledger_len() };
        }
        let mut last_error = String::new();
        for _ in 0..=self.config.phase_retries {
            let attempt = self.state.attempt(phase) + 1;
            self.state.attempts.insert(phase, attempt);
            self.state.visit.attempts += 1;
            self.state.in_flight = Some(attempt);
            self.emit(EventKind::PhaseStarted, json!({"phase": phase, "attempt": attempt}))?;
            self.save()?;

            let started = Instant::now();
            let result = self.execute(phase, attempt);
            self.state.visit.wall_time_secs += started.elapsed().as_secs_f64();
            self.state.in_flight = None;
            match result {
                Ok(output) => {
                    self.write_phase_artifacts(phase, &output)?;
                    self.state.outputs.insert(phase, output);
                    self.emit(EventKind::PhaseCompleted, json!({"phase": phase, "attempt": attempt}))?;
                    if self.state.task.mode() == Mode::Copilot {
                        self.open_gate(phase, attempt)?;
                    } else {
                        self.advance()?;
                    }
                    self.save()?;
                    return Ok(());
                }
                Err(e) => {
                    log::warn!("{phase} attempt {attempt} failed: {e}");
                    last_error = e.to_string();
                    self.emit(EventKind::PhaseFailed, json!({"phase": phase, "attempt": attempt, "error": last_error}))?;
                    self.save()?;
                }
            }
        }
        self.close_visit(phase, false);
        self.state.status = RunStatus::Failed;
        self.state.failed_phase = Some(phase);
        self.state.failure = Some(last_error.clone());
        self.emit(EventKind::RunFailed, json!({"phase": phase, "error": last_error}))?;
        self.save()
    }

    fn close_visit(&mut self, phase: PhaseId, succeeded: bool) {
        let visit = std::mem::take(&mut self.state.visit);
        self.state.telemetry.push(PhaseStats {
            phase,
            wall_time_secs: visit.wall_time_secs,
            cost: self.rs.services.gateway.cost_since(visit.ledger_start),
            attempts: visit.attempts,
            succeeded,
        });
    }

    fn open_gate(&mut self, phase: PhaseId, attempt: u32) -> Result<(), PipelineError> {
        let gate = PendingGate { gate_id: format!("{}-{attempt}", phase.slug()), phase, attempt };
        self.state.status = RunStatus::AwaitingDecision;
        self.state.pending = Some(gate.clone());
        self.emit(
            EventKind::GateOpened,
            json!({"phase": phase, "gate_id": gate.gate_id, "attempt": attempt, "summary": self.gate_summary(phase)}),
        )
    }

    fn gate_summary(&self, phase: PhaseId) -> String {
        self.state.outputs.get(&phase).map(|o| truncate_tail(&o.render(), GATE_SUMMARY_CHARS)).unwrap_or_default()
    }

    /// Returns false when the decision source gave up; the run stays at the
    /// checkpoint and can be resumed.
    fn await_decision(&mut self, gate: &mut dyn DecisionSource) -> Result<bool, PipelineError> {
        let Some(pending) = self.state.pending.clone() else {
            return Err(PipelineError::Invalid("awaiting a decision without a pending gate".into()));
        };
        let request = GateRequest { summary: self.gate_summary(pending.phase), gate: pending.clone() };
        // a decision submitted while no driver was running takes precedence
        let recorded = read_decision(self.dir, &pending.gate_id).map_err(PipelineError::Gate)?;
        let record = match recorded.map_or_else(|| gate.decide(self.dir, &request), Ok) {
            Ok(r) => r,
            Err(GateError::Interrupted(why)) => {
                log::info!("run left at the {} checkpoint: {why}", pending.phase);
                return Ok(false);
            }
            Err(e) => return Err(PipelineError::Gate(e)),
        };
        self.emit(
            EventKind::DecisionApplied,
            json!({
                "phase": pending.phase,
                "gate_id": pending.gate_id,
                "decision_id": record.decision_id,
                "source": record.source,
                "decision": record.decision,
            }),
        )?;
        self.state.pending = None;
        self.state.status = RunStatus::Running;
        match record.decision {
            HumanDecision::Proceed => self.advance()?,
            HumanDecision::Retry { notes } => {
                // only the accepted attempt's output feeds later phases
                self.state.outputs.remove(&pending.phase);
                self.state.task.add_notes(pending.phase, notes);
            }
        }
        self.save()?;
        Ok(true)
    }

    /// Closes the current visit and moves the phase pointer.
    fn advance(&mut self) -> Result<(), PipelineError> {
        let phase = self.state.phase;
        self.close_visit(phase, true);
        match phase.next() {
            Some(next) => {
                self.state.phase = next;
                Ok(())
            }
            None => match self.state.outputs.get(&phase) {
                Some(PhaseOutput::Refinement { decision: RefinementDecision::Revisit { phase: target }, .. })
                    if self.state.rewinds_used < self.config.rewind_budget =>
                {
                    let target = *target;
                    self.rewind(target)
                }
                _ => self.complete(),
            },
        }
    }

    fn rewind(&mut self, target: PhaseId) -> Result<(), PipelineError> {
        let outputs = &self.state.outputs;
        let exp = match outputs.get(&PhaseId::RunningExperiments) {
            Some(PhaseOutput::Experiments(e)) => Some(e),
            _ => None,
        };
        let previous = PreviousRound {
            results_code: exp.map(|e| e.code.clone()).unwrap_or_default(),
            exp_results: exp.map(|e| e.output.clone()).unwrap_or_default(),
            interpretation: outputs.get(&PhaseId::ResultsInterpretation).map(PhaseOutput::render).unwrap_or_default(),
            report: outputs.get(&PhaseId::ReportWriting).map(PhaseOutput::render).unwrap_or_default(),
            reviewer_response: match outputs.get(&PhaseId::ReportRefinement) {
                Some(PhaseOutput::Refinement { reviews, .. }) => render_reviews(reviews),
                _ => String::new(),
            },
        };
        self.state.previous = Some(previous);
        self.state.rewinds_used += 1;
        self.state.outputs.retain(|p, _| *p < target);
        self.state.phase = target;
        let used = self.state.rewinds_used;
        self.emit(EventKind::Rewind, json!({"to": target, "rewinds_used": used}))
    }

    fn complete(&mut self) -> Result<(), PipelineError> {
        let latex = match self.state.outputs.get(&PhaseId::ReportWriting) {
            Some(PhaseOutput::Report(r)) => r.latex.clone(),
            _ => return Err(PipelineError::Invalid("finishing without a report".into())),
        };
        let report = self.dir.write_artifact("report.tex", &latex)?;
        let figures = self.dir.figures();
        let latex_c = &self.rs.services.latex;
        let check = latex_c.check(&latex, Some(&figures));
        let log = match &check {
            Ok(()) => format!("{}: ok\n", latex_c.name()),
            Err(e) => format!("{}: {e}\n", latex_c.name()),
        };
        self.dir.write_artifact("report_check.log", &log)?;
        if check.is_ok() {
            if let Err(e) = latex_c.render_pdf(&latex, Some(&figures), &self.dir.artifacts()) {
                log::warn!("PDF rendering failed: {e}");
            }
        }
        self.state.report_compiled = check.is_ok();
        self.state.status = RunStatus::Complete;
        let rel = report.strip_prefix(self.dir.path()).unwrap_or(&report).to_string_lossy().into_owned();
        let compiled = self.state.report_compiled;
        self.emit(EventKind::RunCompleted, json!({"report": rel, "compiled": compiled}))
    }

    fn write_phase_artifacts(&self, phase: PhaseId, output: &PhaseOutput) -> Result<(), PipelineError> {
        match output {
            PhaseOutput::LiteratureReview { papers, .. } => {
                self.dir.write_artifact("literature_review.txt", &render_review(papers))?;
            }
            PhaseOutput::Plan { text } => {
                self.dir.write_artifact("plan.txt", text)?;
            }
            PhaseOutput::DatasetCode { code, .. } => {
                self.dir.write_artifact("dataset.py", code)?;
            }
            PhaseOutput::Experiments(e) => {
                self.dir.write_artifact("experiment.py", &e.code)?;
                self.dir.write_artifact("experiment_output.txt", &e.output)?;
            }
            PhaseOutput::Interpretation { text } => {
                self.dir.write_artifact("interpretation.txt", text)?;
            }
            PhaseOutput::Report(r) => {
                self.dir.write_artifact("report.tex", &r.latex)?;
            }
            PhaseOutput::Refinement { reviews, decision } => {
                let text = serde_json::to_string_pretty(&json!({"decision": decision, "reviews": reviews}))
                    .map_err(std::io::Error::other)?;
                self.dir.write_artifact("reviews.json", &text)?;
            }
        }
        debug_assert_eq!(phase, self.state.phase);
        Ok(())
    }

    fn execute(&self, phase: PhaseId, attempt: u32) -> Result<PhaseOutput, PhaseError> {
        let ctx = PhaseCtx {
            services: &self.rs.services,
            config: &self.config,
            task: &self.state.task,
            phase,
            attempt,
            transcript: &self.transcript,
        };
        let inputs = Inputs { state: &self.state };
        let second = inputs.second_round();
        let with_second = |context: String| if second.is_empty() { context } else { format!("{second}\n{context}") };
        match phase {
            PhaseId::LiteratureReview => literature_review(&ctx, &second),
            PhaseId::PlanFormulation => {
                let context = fill(prompts::CONTEXT_PLAN, &[("lit_review", &inputs.lit_review()?)]);
                plan_formulation(&ctx, &with_second(context))
            }
            PhaseId::DataPreparation => {
                let context =
                    fill(prompts::CONTEXT_DATA_PREP, &[("lit_review", &inputs.lit_review()?), ("plan", inputs.text(PhaseId::PlanFormulation)?)]);
                data_preparation(&ctx, &with_second(context))
            }
            PhaseId::RunningExperiments => {
                let plan = inputs.text(PhaseId::PlanFormulation)?;
                let mode = match &self.rs.held_out {
                    Some(h) => ScoringMode::HeldOutMetric(h.clone()),
                    None => ScoringMode::LlmReward { plan: plan.to_string() },
                };
                let insights = with_second(inputs.lit_review()?);
                let solver_inputs =
                    SolverInputs { plan, insights: &insights, dataset_code: inputs.text(PhaseId::DataPreparation)?, mode: &mode };
                let mut trace = Vec::new();
                let out = running_experiments(&ctx, solver_inputs, &mut |r| trace.push(r.clone()))?;
                self.write_trace("mle_solver", attempt, &trace)?;
                Ok(PhaseOutput::Experiments(out))
            }
            PhaseId::ResultsInterpretation => {
                let exp = inputs.experiments()?;
                let context = fill(
                    prompts::CONTEXT_INTERPRETATION,
                    &[
                        ("lit_review", &inputs.lit_review()?),
                        ("plan", inputs.text(PhaseId::PlanFormulation)?),
                        ("dataset_code", inputs.text(PhaseId::DataPreparation)?),
                        ("results_code", &exp.code),
                        ("exp_results", &exp.output),
                    ],
                );
                results_interpretation(&ctx, &with_second(context))
            }
            PhaseId::ReportWriting => {
                let exp = inputs.experiments()?;
                let lit = inputs.lit_review()?;
                let insights = with_second(inputs.text(PhaseId::ResultsInterpretation)?.to_string());
                let report_inputs = ReportInputs {
                    plan: inputs.text(PhaseId::PlanFormulation)?,
                    lit_review: &lit,
                    exp_code: &exp.code,
                    exp_results: &exp.output,
                    insights: &insights,
                    figures: &exp.figures,
                };
                let result = report_writing(&ctx, report_inputs)?;
                self.write_trace("paper_solver", attempt, &result.trace)?;
                Ok(PhaseOutput::Report(result.into_output()))
            }
            PhaseId::ReportRefinement => {
                let exp = inputs.experiments()?;
                let context = fill(
                    prompts::CONTEXT_REFINEMENT,
                    &[
                        ("lit_review", &inputs.lit_review()?),
                        ("plan", inputs.text(PhaseId::PlanFormulation)?),
                        ("dataset_code", inputs.text(PhaseId::DataPreparation)?),
                        ("results_code", &exp.code),
                        ("exp_results", &exp.output),
                        ("interpretation", inputs.text(PhaseId::ResultsInterpretation)?),
                    ],
                );
                let may_revisit = self.state.rewinds_used < self.config.rewind_budget;
                report_refinement(
                    &ctx,
                    &with_second(context),
                    inputs.text(PhaseId::PlanFormulation)?,
                    inputs.text(PhaseId::ReportWriting)?,
                    may_revisit,
                )
            }
        }
    }

    fn write_trace<T: Serialize>(&self, name: &str, attempt: u32, records: &[T]) -> Result<(), PhaseError> {
        #[derive(Serialize)]
        struct Line<'r, T> {
            round: u32,
            attempt: u32,
            #[serde(flatten)]
            record: &'r T,
        }
        for r in records {
            let line = Line { round: self.state.rewinds_used, attempt, record: r };
            self.dir.append_trace(name, &line).map_err(|e| PhaseError::Failed(e.to_string()))?;
        }
        Ok(())
    }
}

/// Read access to earlier outputs for context prompts.
struct Inputs<'s> {
    state: &'s RunState,
}

impl<'s> Inputs<'s> {
    fn missing(phase: PhaseId) -> PhaseError {
        PhaseError::Failed(format!("the {phase} output is missing"))
    }

    fn lit_review(&self) -> Result<String, PhaseError> {
        match self.state.outputs.get(&PhaseId::LiteratureReview) {
            Some(PhaseOutput::LiteratureReview { papers, .. }) => Ok(render_review(papers)),
            _ => Err(Self::missing(PhaseId::LiteratureReview)),
        }
    }

    /// Text of the plan, interpretation, dataset code, or report.
    fn text(&self, phase: PhaseId) -> Result<&'s str, PhaseError> {
        match self.state.outputs.get(&phase) {
            Some(PhaseOutput::Plan { text }) | Some(PhaseOutput::Interpretation { text }) => Ok(text),
            Some(PhaseOutput::DatasetCode { code, .. }) => Ok(code),
            Some(PhaseOutput::Report(r)) => Ok(&r.latex),
            _ => Err(Self::missing(phase)),
        }
    }

    fn experiments(&self) -> Result<&'s ExperimentOutput, PhaseError> {
        match self.state.outputs.get(&PhaseId::RunningExperiments) {
            Some(PhaseOutput::Experiments(e)) => Ok(e),
            _ => Err(Self::missing(PhaseId::RunningExperiments)),
        }
    }

    fn second_round(&self) -> String {
        match &self.state.previous {
            None => String::new(),
            Some(p) => fill(
                prompts::SECOND_ROUND,
                &[
                    ("prev_results_code", &p.results_code),
                    ("prev_exp_results", &p.exp_results),
                    ("prev_interpretation", &p.interpretation),
                    ("prev_report", &p.report),
                    ("reviewer_response", &p.reviewer_response),
                ],
            ),
        }
    }
}

#[cfg(test)]
mod tests;
