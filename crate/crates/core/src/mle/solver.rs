//! The experiment-code solver loop: propose, execute, repair, score, reflect,
//! keep the best.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::command::{Command, CommandKind, Grammar, Keyword};
use crate::context::{PhaseCtx, PhaseError};
use crate::edit::{apply_edit, numbered};
use crate::gateway::GatewayError;
use crate::output::ExperimentOutput;
use crate::prompts::{self, fill};
use crate::tools::sandbox::{truncate_head_tail, ExecJob, ExecutionResult};

use super::pool::{CandidatePool, Offer, ProgramCandidate};
use super::scoring::{llm_reward, HeldOut, ScoringMode};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("no candidate program ran successfully within {steps} solver steps")]
    ExperimentsFailed { steps: u32 },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("sandbox: {0}")]
    Sandbox(String),
}

impl From<SolverError> for PhaseError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::ExperimentsFailed { .. } => PhaseError::Failed(e.to_string()),
            SolverError::Gateway(g) => PhaseError::Gateway(g),
            SolverError::Sandbox(s) => PhaseError::Sandbox(s),
        }
    }
}

/// Everything the solver reads but never changes.
#[derive(Debug, Clone)]
pub struct SolverInputs<'a> {
    pub plan: &'a str,
    pub insights: &'a str,
    pub dataset_code: &'a str,
    pub mode: &'a ScoringMode,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub pool: CandidatePool,
    pub error_history: VecDeque<String>,
    pub code_history: VecDeque<String>,
    pub reflection: String,
    /// Completed batches.
    pub step: u32,
    pub prev_command: String,
    rng: ChaCha8Rng,
}

impl SolverState {
    pub fn new(max_top_codes: usize, seed: u64) -> Self {
        Self {
            pool: CandidatePool::new(max_top_codes),
            error_history: VecDeque::new(),
            code_history: VecDeque::new(),
            reflection: String::new(),
            step: 0,
            prev_command: String::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn push_bounded(list: &mut VecDeque<String>, cap: usize, item: String) {
        list.push_back(item);
        while list.len() > cap {
            list.pop_front();
        }
    }
}

/// One line of the persisted solver trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u32,
    pub candidate: u32,
    /// Fence header of the applied command, e.g. `EDIT 3 5` or `REPLACE`.
    pub command: Option<String>,
    /// Line count change relative to the base program.
    pub diff: String,
    pub compiled: bool,
    pub repairs: u32,
    pub score: Option<f64>,
    pub selected: bool,
    pub offer: Option<Offer>,
    pub pool_max: Option<f64>,
    /// First 16 hex digits of the SHA-256 of the batch reflection.
    pub reflection_digest: String,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub best: ProgramCandidate,
    pub trace: Vec<TraceRecord>,
    /// Pool maximum after every batch (0 while the pool is empty).
    pub score_trace: Vec<f64>,
}

impl SolveResult {
    pub fn into_output(self) -> ExperimentOutput {
        ExperimentOutput {
            code: self.best.code(),
            output: self.best.output.clone(),
            score: self.best.score.unwrap_or(0.0),
            figures: self.best.figures.clone(),
            score_trace: self.score_trace,
        }
    }
}

/// Stable hash over a trace for reproducibility checks.
pub fn trace_hash(trace: &[TraceRecord]) -> String {
    let mut h = Sha256::new();
    for r in trace {
        h.update(serde_json::to_vec(r).expect("trace serializes"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
}

/// How one candidate pipeline ended.
#[derive(Debug, Clone)]
struct CandidateRun {
    command: Option<Command>,
    base_len: usize,
    lines: Vec<String>,
    result: Option<ExecutionResult>,
    repairs: u32,
    score: Option<f64>,
    error: Option<String>,
}

pub struct Solver<'c, 'a> {
    ctx: &'c PhaseCtx<'a>,
    inputs: SolverInputs<'c>,
}

impl<'c, 'a> Solver<'c, 'a> {
    pub fn new(ctx: &'c PhaseCtx<'a>, inputs: SolverInputs<'c>) -> Self {
        Self { ctx, inputs }
    }

    fn err_hist(&self, state: &SolverState) -> String {
        if state.error_history.is_empty() {
            String::new()
        } else {
            let errs: Vec<&str> = state.error_history.iter().map(String::as_str).collect();
            fill(prompts::MLE_ERROR_HISTORY, &[("errs", &errs.join("\n"))])
        }
    }

    pub fn system_prompt(&self, state: &SolverState, bootstrap: bool) -> String {
        let tools = if bootstrap {
            prompts::MLE_REPLACE_TOOL.to_string()
        } else {
            format!("{}\n{}", prompts::MLE_EDIT_TOOL, prompts::MLE_REPLACE_TOOL)
        };
        let command_descriptions = format!("{}\n{tools}", prompts::MLE_COMMAND_DESCRIPTION);
        let code_reflect = if state.reflection.is_empty() {
            String::new()
        } else {
            format!("The following is a reflection on your previous code:\n{}", state.reflection)
        };
        let mut dataset_description = fill(prompts::MLE_DATASET_DESCRIPTION, &[("dataset_code", self.inputs.dataset_code)]);
        if let ScoringMode::HeldOutMetric(h) = self.inputs.mode {
            dataset_description.push('\n');
            dataset_description.push_str(&fill(prompts::MLE_HELD_OUT, &[("n", &h.len().to_string())]));
        }
        fill(
            prompts::MLE_SYSTEM,
            &[
                ("role_description", prompts::MLE_ROLE.trim_end_matches('.')),
                ("phase_prompt", prompts::MLE_PHASE),
                ("insights", self.inputs.insights),
                ("code_reflect", &code_reflect),
                ("notes", &prompts::notes_block(self.ctx.task, self.ctx.phase)),
                ("plan", self.inputs.plan),
                ("dataset_description", &dataset_description),
                ("command_descriptions", &command_descriptions),
            ],
        )
    }

    /// Asks for one EDIT or REPLACE against `base` and applies it. Unusable
    /// replies are re-asked up to `comparison_trials` times.
    fn propose(
        &self,
        state: &mut SolverState,
        base: Option<&ProgramCandidate>,
    ) -> Result<Option<(Command, Vec<String>)>, GatewayError> {
        let cfg = self.ctx.config;
        let bootstrap = base.is_none();
        let empty = Vec::new();
        let base_lines = base.map_or(&empty, |b| &b.lines);
        let system = self.system_prompt(state, bootstrap);
        let err_hist = self.err_hist(state);
        let base_user = match base {
            None => fill(prompts::MLE_INITIAL_CODE, &[("err_hist", &err_hist)]),
            Some(b) => {
                let history: Vec<&str> = state.code_history.iter().map(String::as_str).collect();
                fill(
                    prompts::MLE_STEP_USER,
                    &[
                        ("err_hist", &err_hist),
                        ("history_str", &history.join("\n")),
                        ("step", &state.step.to_string()),
                        ("code_lines", &numbered(&b.lines)),
                        ("code_output", &b.output),
                        ("score", &b.score.unwrap_or(0.0).to_string()),
                        ("prev_command", &state.prev_command),
                    ],
                )
            }
        };
        let (grammar, temperature) = if bootstrap {
            (Grammar::new([Keyword::Replace]), cfg.initial_code_temperature)
        } else {
            (Grammar::new([Keyword::Edit, Keyword::Replace]), cfg.solver_temperature)
        };

        let mut user = base_user.clone();
        let mut last_error = String::new();
        for _ in 0..=cfg.comparison_trials {
            let response = self.ctx.chat("mle_solver", state.step, &system, &user, temperature)?;
            let outcome = grammar.parse(&response).map_err(|e| e.to_string()).and_then(|cmd| {
                let new_lines = match cmd.kind {
                    CommandKind::Edit { from, to } => {
                        apply_edit(base_lines, from, to, &cmd.body_lines()).map_err(|e| e.to_string())?
                    }
                    _ => cmd.body_lines(),
                };
                Ok((cmd, new_lines))
            });
            match outcome {
                Ok((cmd, lines)) => {
                    state.prev_command = cmd.to_fence();
                    return Ok(Some((cmd, lines)));
                }
                Err(e) => {
                    state.prev_command = response.clone();
                    user = format!(
                        "{base_user}\n{}",
                        fill(prompts::MLE_COMMAND_ERROR, &[("model_resp", &response), ("cmd_str", &e)])
                    );
                    last_error = e;
                }
            }
        }
        let cap = cfg.error_history_len;
        SolverState::push_bounded(
            &mut state.error_history,
            cap,
            format!("{}: {last_error}", prompts::MLE_NO_COMMAND),
        );
        Ok(None)
    }

    /// Runs the dataset code followed by the candidate.
    pub fn execute_candidate(&self, lines: &[String]) -> Result<ExecutionResult, SolverError> {
        let candidate = lines.join("\n");
        let code = if self.inputs.dataset_code.is_empty() {
            candidate
        } else {
            format!("{}\n{candidate}", self.inputs.dataset_code)
        };
        let mut job = ExecJob::new(code, self.ctx.config.experiment_timeout());
        if let ScoringMode::HeldOutMetric(h) = self.inputs.mode {
            job.stage.push((HeldOut::INPUTS_FILE.to_string(), h.inputs_json()));
            job.collect.push(HeldOut::PREDICTIONS_FILE.to_string());
        }
        self.ctx
            .services
            .executor
            .execute(&job)
            .map_err(|e| SolverError::Sandbox(e.to_string()))
    }

    fn error_of(&self, r: &ExecutionResult) -> Option<String> {
        r.error_text(self.ctx.config.experiment_timeout())
            .map(|e| truncate_head_tail(&e, self.ctx.config.stdout_budget_chars))
    }

    /// Repairs failing code, at most `repair_attempts` completions. Returns
    /// the repaired lines and result on the first clean run.
    fn repair(
        &self,
        step: u32,
        mut lines: Vec<String>,
        mut error: String,
    ) -> Result<(u32, Result<(Vec<String>, ExecutionResult), String>), SolverError> {
        let cfg = self.ctx.config;
        let grammar = Grammar::new([Keyword::ExecuteCode]);
        for attempt in 1..=cfg.repair_attempts {
            let user = fill(prompts::REPAIR_USER, &[("error", &error), ("code", &lines.join("\n"))]);
            let response = self.ctx.chat("code_repair", step, prompts::REPAIR_SYSTEM, &user, cfg.repair_temperature)?;
            let Ok(cmd) = grammar.parse(&response) else { continue };
            lines = cmd.body_lines();
            let result = self.execute_candidate(&lines)?;
            match self.error_of(&result) {
                None => return Ok((attempt, Ok((lines, result)))),
                Some(e) => error = e,
            }
        }
        Ok((cfg.repair_attempts, Err(error)))
    }

    fn score(&self, step: u32, lines: &[String], result: &ExecutionResult) -> f64 {
        match self.inputs.mode {
            ScoringMode::LlmReward { plan } => llm_reward(self.ctx, step, plan, &lines.join("\n"), &result.stdout).score,
            ScoringMode::HeldOutMetric(h) => {
                h.score_predictions(result.files.get(HeldOut::PREDICTIONS_FILE).map(String::as_str))
            }
        }
    }

    fn run_candidate(&self, state: &mut SolverState) -> Result<CandidateRun, SolverError> {
        let base = state.pool.sample(&mut state.rng).cloned();
        let base_len = base.as_ref().map_or(0, |b| b.lines.len());
        let Some((command, lines)) = self.propose(state, base.as_ref())? else {
            return Ok(CandidateRun {
                command: None,
                base_len,
                lines: base.map(|b| b.lines).unwrap_or_default(),
                result: None,
                repairs: 0,
                score: None,
                error: Some(prompts::MLE_NO_COMMAND.to_string()),
            });
        };
        let first = self.execute_candidate(&lines)?;
        let (lines, result, repairs) = match self.error_of(&first) {
            None => (lines, first, 0),
            Some(err) => match self.repair(state.step, lines.clone(), err)? {
                (n, Ok((fixed, r))) => (fixed, r, n),
                (n, Err(err)) => {
                    let cap = self.ctx.config.error_history_len;
                    SolverState::push_bounded(&mut state.error_history, cap, err.clone());
                    return Ok(CandidateRun {
                        command: Some(command),
                        base_len,
                        lines,
                        result: Some(first),
                        repairs: n,
                        score: None,
                        error: Some(err),
                    });
                }
            },
        };
        let score = self.score(state.step, &lines, &result);
        Ok(CandidateRun { command: Some(command), base_len, lines, result: Some(result), repairs, score: Some(score), error: None })
    }

    /// Produces the batch reflection. A gateway failure yields an empty one.
    fn reflect(&self, state: &SolverState, run: &CandidateRun) -> String {
        let code = run.lines.join("\n");
        let user = match (&run.error, run.score) {
            (None, Some(score)) => format!(
                "{}\nThe following was the output:\n{}\nScore: {score}",
                fill(prompts::REFLECT_SUCCESS, &[("code", &code)]),
                run.result.as_ref().map_or("", |r| r.stdout.as_str())
            ),
            (err, _) => fill(prompts::REFLECT_ERROR, &[("code", &code), ("error", err.as_deref().unwrap_or(""))]),
        };
        let system = self.system_prompt(state, false);
        self.ctx
            .chat("reflection", state.step, &system, &user, self.ctx.config.solver_temperature)
            .unwrap_or_else(|e| {
                log::warn!("reflection skipped: {e}");
                String::new()
            })
    }

    /// One solver step: `comparison_trials` candidates, the best offered to
    /// the pool, then one reflection.
    pub fn step_batch(&self, state: &mut SolverState) -> Result<Vec<TraceRecord>, SolverError> {
        let width = self.ctx.config.comparison_trials.max(1);
        let mut runs = Vec::with_capacity(width as usize);
        for _ in 0..width {
            runs.push(self.run_candidate(state)?);
        }

        // best success; the earliest wins a tie
        let best_idx = runs
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.score.map(|s| (i, s)))
            .fold(None::<(usize, f64)>, |acc, (i, s)| match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((i, s)),
            })
            .map(|(i, _)| i);

        let offer = best_idx.map(|i| {
            let r = &runs[i];
            let result = r.result.as_ref().expect("scored runs executed");
            let mut cand = ProgramCandidate::scored(r.lines.clone(), result.stdout.clone(), r.score.unwrap_or(0.0))
                .expect("scores are validated in [0, 1]");
            cand.figures = result.figures.clone();
            state.pool.offer(cand)
        });

        let cap = self.ctx.config.code_history_len;
        for r in &runs {
            let header = r.command.as_ref().map_or("none".to_string(), header_of);
            let outcome = match (&r.error, r.score) {
                (None, Some(s)) => format!("ran cleanly, score {s}"),
                (err, _) => format!("failed: {}", last_line(err.as_deref().unwrap_or(""))),
            };
            SolverState::push_bounded(&mut state.code_history, cap, format!("Command: {header}\nResult: {outcome}"));
        }

        let reflect_on = best_idx.unwrap_or(runs.len() - 1);
        state.reflection = self.reflect(state, &runs[reflect_on]);
        let reflection_digest = digest(&state.reflection);
        let pool_max = state.pool.max_score();

        let records = runs
            .iter()
            .enumerate()
            .map(|(i, r)| TraceRecord {
                step: state.step,
                candidate: i as u32,
                command: r.command.as_ref().map(header_of),
                diff: format!("{} -> {} lines", r.base_len, r.lines.len()),
                compiled: r.score.is_some(),
                repairs: r.repairs,
                score: r.score,
                selected: Some(i) == best_idx,
                offer: if Some(i) == best_idx { offer } else { None },
                pool_max,
                reflection_digest: reflection_digest.clone(),
            })
            .collect();
        state.step += 1;
        Ok(records)
    }

    /// Runs `solver_steps` batches and returns the best program. Batches keep
    /// bootstrapping from an empty file until one candidate runs cleanly.
    pub fn solve(&self, state: &mut SolverState, trace_sink: &mut dyn FnMut(&TraceRecord)) -> Result<SolveResult, SolverError> {
        let steps = self.ctx.config.solver_steps;
        let mut trace = Vec::new();
        let mut score_trace = Vec::new();
        for _ in 0..steps {
            let records = self.step_batch(state)?;
            for r in &records {
                trace_sink(r);
            }
            trace.extend(records);
            score_trace.push(state.pool.max_score().unwrap_or(0.0));
        }
        let best = state.pool.best().cloned().ok_or(SolverError::ExperimentsFailed { steps })?;
        Ok(SolveResult { best, trace, score_trace })
    }
}

fn header_of(cmd: &Command) -> String {
    match cmd.kind {
        CommandKind::Edit { from, to } => format!("EDIT {from} {to}"),
        k => k.keyword().as_str().to_string(),
    }
}

fn last_line(s: &str) -> &str {
    s.trim().lines().last().unwrap_or("")
}

/// The experiments phase: solve with a seed derived from the task.
pub fn running_experiments(
    ctx: &PhaseCtx<'_>,
    inputs: SolverInputs<'_>,
    trace_sink: &mut dyn FnMut(&TraceRecord),
) -> Result<ExperimentOutput, PhaseError> {
    let mut state = SolverState::new(ctx.config.max_top_codes, ctx.task.seed());
    let solver = Solver::new(ctx, inputs);
    Ok(solver.solve(&mut state, trace_sink)?.into_output())
}
