//! On-disk run directories.
//!
//! ```text
//! <root>/<run_id>/
//!   config.toml          configuration snapshot
//!   task.json            the research task as submitted
//!   state.json           RunState, replaced atomically
//!   events.jsonl         event log
//!   ledger.jsonl         gateway usage ledger
//!   telemetry.json       per-phase rows
//!   transcripts/<phase>.jsonl
//!   traces/mle_solver.jsonl, traces/paper_solver.jsonl
//!   artifacts/           report.tex, reviews.json, experiment.py, ...
//!   decisions/<gate_id>.json
//!   mock/                copy of the mock script, when one is used
//!   heldout/             labeled data for held-out scoring, when used
//! ```
//!
//! Everything needed to resume lives inside the directory.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::context::{TranscriptRecord, TranscriptSink};
use crate::gateway::LedgerEntry;
use crate::phase::PhaseId;
use crate::task::ResearchTask;

use super::state::RunState;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("run `{0}` not found")]
    NotFound(String),
    #[error("run `{run_id}` has a corrupt state file: {reason}")]
    CorruptState { run_id: String, reason: String },
    #[error("`{0}` is not a valid run id (letters, digits, `-` and `_` only)")]
    InvalidRunId(String),
    #[error("run `{0}` already exists")]
    AlreadyExists(String),
    #[error("run directory: {0}")]
    Io(#[from] std::io::Error),
}

pub fn valid_run_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Timestamped id with a random suffix, e.g. `run-20261019-142501-3fa9`.
pub fn new_run_id() -> String {
    let suffix: u16 = rand::random();
    format!("run-{}-{suffix:04x}", chrono::Utc::now().format("%Y%m%d-%H%M%S"))
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    write_atomic(path, text.as_bytes())
}

/// The directory holding all runs.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates the directory skeleton and writes the config and task.
    pub fn create(&self, run_id: &str, config: &Config, task: &ResearchTask) -> Result<RunDir, StoreError> {
        if !valid_run_id(run_id) {
            return Err(StoreError::InvalidRunId(run_id.to_string()));
        }
        fs::create_dir_all(&self.root)?;
        let path = self.root.join(run_id);
        if let Err(e) = fs::create_dir(&path) {
            return Err(if e.kind() == std::io::ErrorKind::AlreadyExists {
                StoreError::AlreadyExists(run_id.to_string())
            } else {
                e.into()
            });
        }
        let dir = RunDir { path, run_id: run_id.to_string() };
        for sub in ["transcripts", "traces", "artifacts", "decisions"] {
            fs::create_dir_all(dir.path.join(sub))?;
        }
        write_atomic(&dir.path.join("config.toml"), config.to_toml_string().as_bytes())?;
        write_json_atomic(&dir.path.join("task.json"), task)?;
        Ok(dir)
    }

    pub fn open(&self, run_id: &str) -> Result<RunDir, StoreError> {
        if !valid_run_id(run_id) {
            return Err(StoreError::InvalidRunId(run_id.to_string()));
        }
        let path = self.root.join(run_id);
        if !path.join("state.json").is_file() {
            return Err(StoreError::NotFound(run_id.to_string()));
        }
        Ok(RunDir { path, run_id: run_id.to_string() })
    }

    /// Ids of every run with a state file, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let rd = match fs::read_dir(&self.root) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut ids: Vec<String> = rd
            .filter_map(Result::ok)
            .filter(|e| e.path().join("state.json").is_file())
            .filter_map(|e| e.file_name().to_str().map(str::to_string))
            .filter(|id| valid_run_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
    run_id: String,
}

impl RunDir {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn events_path(&self) -> PathBuf {
        self.path.join("events.jsonl")
    }

    pub fn artifacts(&self) -> PathBuf {
        self.path.join("artifacts")
    }

    pub fn figures(&self) -> PathBuf {
        self.artifacts().join("figures")
    }

    pub fn transcripts(&self) -> PathBuf {
        self.path.join("transcripts")
    }

    pub fn traces(&self) -> PathBuf {
        self.path.join("traces")
    }

    pub fn decisions(&self) -> PathBuf {
        self.path.join("decisions")
    }

    pub fn mock_dir(&self) -> PathBuf {
        self.path.join("mock")
    }

    pub fn heldout_dir(&self) -> PathBuf {
        self.path.join("heldout")
    }

    pub fn scratch(&self) -> PathBuf {
        self.path.join("scratch")
    }

    pub fn report_path(&self) -> PathBuf {
        self.artifacts().join("report.tex")
    }

    pub fn config(&self) -> Result<Config, StoreError> {
        Config::load(self.path.join("config.toml")).map_err(|e| StoreError::CorruptState {
            run_id: self.run_id.clone(),
            reason: e.to_string(),
        })
    }

    pub fn load_state(&self) -> Result<RunState, StoreError> {
        let text = match fs::read_to_string(self.path.join("state.json")) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(self.run_id.clone())),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |reason: String| StoreError::CorruptState { run_id: self.run_id.clone(), reason };
        let state: RunState = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if state.run_id != self.run_id {
            return Err(corrupt(format!("state belongs to run `{}`", state.run_id)));
        }
        state.check_invariants().map_err(corrupt)?;
        Ok(state)
    }

    pub fn save_state(&self, state: &RunState) -> Result<(), StoreError> {
        write_json_atomic(&self.path.join("state.json"), state)?;
        write_json_atomic(&self.path.join("telemetry.json"), &state.telemetry)?;
        Ok(())
    }

    pub fn save_ledger(&self, entries: &[LedgerEntry]) -> Result<(), StoreError> {
        let mut text = String::new();
        for e in entries {
            text.push_str(&serde_json::to_string(e).map_err(std::io::Error::other)?);
            text.push('\n');
        }
        write_atomic(&self.path.join("ledger.jsonl"), text.as_bytes())?;
        Ok(())
    }

    pub fn load_ledger(&self) -> Result<Vec<LedgerEntry>, StoreError> {
        let text = match fs::read_to_string(self.path.join("ledger.jsonl")) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                serde_json::from_str(l).map_err(|e| StoreError::CorruptState {
                    run_id: self.run_id.clone(),
                    reason: format!("ledger: {e}"),
                })
            })
            .collect()
    }

    pub fn write_artifact(&self, name: &str, contents: &str) -> Result<PathBuf, StoreError> {
        let path = self.artifacts().join(name);
        write_atomic(&path, contents.as_bytes())?;
        Ok(path)
    }

    /// Appends one JSON line to `traces/<name>.jsonl`.
    pub fn append_trace<T: Serialize>(&self, name: &str, record: &T) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        line.push('\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.traces().join(format!("{name}.jsonl")))?
            .write_all(line.as_bytes())?;
        Ok(())
    }

    /// Drops transcript records of `phase` from attempt `from_attempt` on,
    /// so an interrupted attempt can be replayed cleanly.
    pub fn truncate_transcript(&self, phase: PhaseId, from_attempt: u32) -> Result<(), StoreError> {
        let path = self.transcripts().join(format!("{}.jsonl", phase.slug()));
        let Ok(text) = fs::read_to_string(&path) else { return Ok(()) };
        let kept: String = text
            .lines()
            .filter(|l| serde_json::from_str::<TranscriptRecord>(l).is_ok_and(|r| r.attempt < from_attempt))
            .map(|l| format!("{l}\n"))
            .collect();
        write_atomic(&path, kept.as_bytes())?;
        Ok(())
    }

    pub fn transcript(&self, phase: PhaseId) -> Result<Vec<TranscriptRecord>, StoreError> {
        let path = self.transcripts().join(format!("{}.jsonl", phase.slug()));
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        Ok(text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
    }

    /// SHA-256 of every file under `artifacts/`, `transcripts/` and
    /// `traces/`, keyed by relative path. Two identical runs hash equal.
    pub fn artifact_hashes(&self) -> Result<BTreeMap<String, String>, StoreError> {
        let mut out = BTreeMap::new();
        for sub in ["artifacts", "transcripts", "traces"] {
            hash_tree(&self.path, &self.path.join(sub), &mut out)?;
        }
        Ok(out)
    }
}

fn hash_tree(base: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> std::io::Result<()> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e),
    };
    for entry in rd {
        let path = entry?.path();
        if path.is_dir() {
            hash_tree(base, &path, out)?;
        } else {
            let rel = path.strip_prefix(base).unwrap_or(&path).to_string_lossy().replace('\\', "/");
            out.insert(rel, hex::encode(Sha256::digest(fs::read(&path)?)));
        }
    }
    Ok(())
}

/// Appends transcript records to `transcripts/<phase>.jsonl`.
#[derive(Debug)]
pub struct FileTranscript {
    dir: PathBuf,
    lock: Mutex<()>,
}

impl FileTranscript {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), lock: Mutex::new(()) }
    }
}

impl TranscriptSink for FileTranscript {
    fn record(&self, record: &TranscriptRecord) {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.dir.join(format!("{}.jsonl", record.phase.slug()));
        let written = serde_json::to_string(record).map_err(std::io::Error::other).and_then(|mut line| {
            line.push('\n');
            OpenOptions::new().create(true).append(true).open(&path)?.write_all(line.as_bytes())
        });
        if let Err(e) = written {
            log::error!("could not write transcript {}: {e}", path.display());
        }
    }
}
