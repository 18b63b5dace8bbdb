//! Co-pilot checkpoint gate.
//!
//! Every decision lands in `decisions/<gate_id>.json`, created exclusively,
//! so the first writer wins no matter whether it came from the control API,
//! the CLI, a terminal prompt or a timeout. Resubmitting with the same
//! decision id is accepted and changes nothing.

use std::collections::VecDeque;
use std::fs;
use std::io::{BufRead, Write};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::phase::PhaseId;

use super::state::{PendingGate, RunStatus};
use super::store::{RunDir, StoreError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision")]
pub enum HumanDecision {
    Proceed,
    Retry { notes: Vec<String> },
}

impl HumanDecision {
    /// A retry needs at least one non-blank note.
    pub fn retry(notes: Vec<String>) -> Result<Self, GateError> {
        let d = HumanDecision::Retry { notes };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), GateError> {
        match self {
            HumanDecision::Retry { notes } if notes.iter().all(|n| n.trim().is_empty()) => {
                Err(GateError::Invalid("a retry needs at least one non-empty note".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GateError {
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid decision: {0}")]
    Invalid(String),
    /// The decision source went away (closed input, script ran out).
    #[error("no decision available: {0}")]
    Interrupted(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("decision file: {0}")]
    Io(#[from] std::io::Error),
}

/// A decision as stored in the run directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedDecision {
    pub decision_id: String,
    pub gate_id: String,
    pub phase: PhaseId,
    #[serde(flatten)]
    pub decision: HumanDecision,
    /// `api`, `cli`, `stdin`, `script` or `timeout`.
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Proceed,
    Retry,
}

/// Body of a decision submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_id: Option<String>,
    /// Checked against the run the body is submitted to, when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub phase: PhaseId,
    pub decision: Choice,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl DecisionBody {
    pub fn to_decision(&self) -> Result<HumanDecision, GateError> {
        match self.decision {
            Choice::Proceed => Ok(HumanDecision::Proceed),
            Choice::Retry => HumanDecision::retry(self.notes.clone()),
        }
    }
}

/// Outcome of [`submit_decision`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submitted {
    pub decision: RecordedDecision,
    /// True when an identical earlier submission had already been recorded.
    pub duplicate: bool,
}

fn content_id(gate_id: &str, decision: &HumanDecision) -> String {
    let mut h = Sha256::new();
    h.update(gate_id.as_bytes());
    h.update(serde_json::to_string(decision).unwrap_or_default().as_bytes());
    hex::encode(&h.finalize()[..8])
}

fn decision_path(dir: &RunDir, gate_id: &str) -> std::path::PathBuf {
    dir.decisions().join(format!("{gate_id}.json"))
}

pub fn read_decision(dir: &RunDir, gate_id: &str) -> Result<Option<RecordedDecision>, GateError> {
    match fs::read_to_string(decision_path(dir, gate_id)) {
        Ok(text) => match serde_json::from_str(&text) {
            Ok(d) => Ok(Some(d)),
            // a writer is between create and write; treat as not yet there
            Err(_) if text.trim().is_empty() => Ok(None),
            Err(e) => Err(GateError::Io(std::io::Error::other(e))),
        },
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn find_by_id(dir: &RunDir, decision_id: &str) -> Result<Option<RecordedDecision>, GateError> {
    let Ok(rd) = fs::read_dir(dir.decisions()) else { return Ok(None) };
    for entry in rd.filter_map(Result::ok) {
        if let Ok(text) = fs::read_to_string(entry.path()) {
            if let Ok(d) = serde_json::from_str::<RecordedDecision>(&text) {
                if d.decision_id == decision_id {
                    return Ok(Some(d));
                }
            }
        }
    }
    Ok(None)
}

/// Writes the decision for `gate` unless one exists. Returns whichever
/// decision holds the slot afterwards.
pub fn record_decision(dir: &RunDir, record: RecordedDecision) -> Result<RecordedDecision, GateError> {
    try_record(dir, record).map(|(d, _)| d)
}

/// Like [`record_decision`], also telling whether this call wrote the slot.
fn try_record(dir: &RunDir, record: RecordedDecision) -> Result<(RecordedDecision, bool), GateError> {
    let path = decision_path(dir, &record.gate_id);
    fs::create_dir_all(dir.decisions())?;
    // write to a temp file first so readers never see a partial record
    let text = serde_json::to_string_pretty(&record).map_err(std::io::Error::other)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir.decisions())?;
    tmp.write_all(text.as_bytes())?;
    match tmp.persist_noclobber(&path) {
        Ok(_) => Ok((record, true)),
        Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => loop {
            if let Some(existing) = read_decision(dir, &record.gate_id)? {
                return Ok((existing, false));
            }
            std::thread::sleep(Duration::from_millis(5));
        },
        Err(e) => Err(e.error.into()),
    }
}

/// Accepts a decision for the gate the run is waiting at. Used by the
/// control API and the CLI.
pub fn submit_decision(dir: &RunDir, body: &DecisionBody, source: &str) -> Result<Submitted, GateError> {
    let decision = body.to_decision()?;
    if body.run_id.as_deref().is_some_and(|id| id != dir.run_id()) {
        return Err(GateError::Invalid(format!("body names run {}, not {}", body.run_id.as_deref().unwrap_or(""), dir.run_id())));
    }
    if let Some(id) = &body.decision_id {
        if let Some(existing) = find_by_id(dir, id)? {
            return Ok(Submitted { decision: existing, duplicate: true });
        }
    }
    let state = dir.load_state()?;
    let pending = match (&state.status, &state.pending) {
        (RunStatus::AwaitingDecision, Some(p)) => p.clone(),
        _ => {
            return Err(GateError::Conflict(format!(
                "run {} is not awaiting a decision (status {:?})",
                state.run_id, state.status
            )))
        }
    };
    if pending.phase != body.phase {
        return Err(GateError::Conflict(format!(
            "run is waiting at {}, not {}",
            pending.phase.slug(),
            body.phase.slug()
        )));
    }
    let decision_id = body.decision_id.clone().unwrap_or_else(|| content_id(&pending.gate_id, &decision));
    let record = RecordedDecision {
        decision_id: decision_id.clone(),
        gate_id: pending.gate_id.clone(),
        phase: pending.phase,
        decision,
        source: source.to_string(),
    };
    let (winner, written) = try_record(dir, record)?;
    if winner.decision_id == decision_id {
        return Ok(Submitted { decision: winner, duplicate: !written });
    }
    Err(GateError::Conflict(format!("gate {} was already decided", pending.gate_id)))
}

/// What the pipeline shows at a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateRequest {
    pub gate: PendingGate,
    /// Rendered phase output, shortened for display.
    pub summary: String,
}

/// Supplies the human half of a checkpoint.
pub trait DecisionSource: Send {
    fn decide(&mut self, dir: &RunDir, request: &GateRequest) -> Result<RecordedDecision, GateError>;
}

/// Waits for a decision file written by the API or the CLI. With a timeout,
/// silence turns into Proceed.
#[derive(Debug, Clone)]
pub struct Mailbox {
    pub poll: Duration,
    pub timeout: Option<Duration>,
}

impl Mailbox {
    pub fn new(timeout: Option<Duration>) -> Self {
        Self { poll: Duration::from_millis(25), timeout }
    }
}

impl DecisionSource for Mailbox {
    fn decide(&mut self, dir: &RunDir, request: &GateRequest) -> Result<RecordedDecision, GateError> {
        let start = Instant::now();
        loop {
            if let Some(d) = read_decision(dir, &request.gate.gate_id)? {
                return Ok(d);
            }
            if self.timeout.is_some_and(|t| start.elapsed() >= t) {
                return record_decision(
                    dir,
                    RecordedDecision {
                        decision_id: format!("timeout-{}", request.gate.gate_id),
                        gate_id: request.gate.gate_id.clone(),
                        phase: request.gate.phase,
                        decision: HumanDecision::Proceed,
                        source: "timeout".into(),
                    },
                );
            }
            std::thread::sleep(self.poll);
        }
    }
}

/// Plays back a fixed list of decisions; runs out with `Interrupted`.
#[derive(Debug, Clone, Default)]
pub struct Scripted {
    decisions: VecDeque<HumanDecision>,
}

impl Scripted {
    pub fn new(decisions: impl IntoIterator<Item = HumanDecision>) -> Self {
        Self { decisions: decisions.into_iter().collect() }
    }
}

impl DecisionSource for Scripted {
    fn decide(&mut self, dir: &RunDir, request: &GateRequest) -> Result<RecordedDecision, GateError> {
        let decision = self.decisions.pop_front().ok_or_else(|| GateError::Interrupted("decision script exhausted".into()))?;
        record_decision(
            dir,
            RecordedDecision {
                decision_id: format!("script-{}", request.gate.gate_id),
                gate_id: request.gate.gate_id.clone(),
                phase: request.gate.phase,
                decision,
                source: "script".into(),
            },
        )
    }
}

/// Parses one terminal answer: `proceed`, or `retry` followed by a note.
pub fn parse_answer(line: &str) -> Result<HumanDecision, String> {
    let line = line.trim();
    let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    match word.to_ascii_lowercase().as_str() {
        "p" | "proceed" => Ok(HumanDecision::Proceed),
        "r" | "retry" => {
            let note = rest.trim();
            if note.is_empty() {
                Err("retry needs a note, e.g. `retry include paper X`".into())
            } else {
                Ok(HumanDecision::Retry { notes: vec![note.to_string()] })
            }
        }
        _ => Err("answer `proceed` or `retry <note>`".into()),
    }
}

/// Headless co-pilot gating on a terminal: prints the checkpoint and reads
/// answers line by line. End of input interrupts the run.
pub struct Prompter<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead + Send, W: Write + Send> Prompter<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output }
    }
}

impl<R: BufRead + Send, W: Write + Send> DecisionSource for Prompter<R, W> {
    fn decide(&mut self, dir: &RunDir, request: &GateRequest) -> Result<RecordedDecision, GateError> {
        let gate = &request.gate;
        writeln!(
            self.output,
            "\n=== checkpoint: {} (attempt {}) ===\n{}\n",
            gate.phase, gate.attempt, request.summary
        )?;
        loop {
            write!(self.output, "Decision [proceed | retry <note>]: ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(GateError::Interrupted("input closed at the checkpoint".into()));
            }
            match parse_answer(&line) {
                Ok(decision) => {
                    return record_decision(
                        dir,
                        RecordedDecision {
                            decision_id: format!("stdin-{}", gate.gate_id),
                            gate_id: gate.gate_id.clone(),
                            phase: gate.phase,
                            decision,
                            source: "stdin".into(),
                        },
                    )
                }
                Err(msg) => writeln!(self.output, "{msg}")?,
            }
        }
    }
}
