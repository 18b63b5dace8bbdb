//! Append-only event log of phase transitions and gate traffic.
//!
//! Events carry no timestamps so that identical runs produce identical
//! logs. `seq` starts at 0 and increases by one per event of a run.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RunStarted,
    RunResumed,
    PhaseStarted,
    PhaseCompleted,
    PhaseFailed,
    GateOpened,
    DecisionApplied,
    Rewind,
    RunCompleted,
    RunFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub run_id: String,
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Value,
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    run_id: String,
    next_seq: u64,
}

impl EventLog {
    /// Opens the log at `path`, continuing the sequence of any events
    /// already in it.
    pub fn open(path: impl Into<PathBuf>, run_id: impl Into<String>) -> std::io::Result<Self> {
        let path = path.into();
        let next_seq = read_events(&path)?.last().map_or(0, |e| e.seq + 1);
        // terminate a torn final line so the next event starts cleanly
        if let Ok(bytes) = std::fs::read(&path) {
            if bytes.last().is_some_and(|b| *b != b'\n') {
                OpenOptions::new().append(true).open(&path)?.write_all(b"\n")?;
            }
        }
        Ok(Self { path, run_id: run_id.into(), next_seq })
    }

    pub fn append(&mut self, kind: EventKind, payload: Value) -> std::io::Result<Event> {
        let event = Event { run_id: self.run_id.clone(), seq: self.next_seq, kind, payload };
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut line = serde_json::to_string(&event).map_err(std::io::Error::other)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        self.next_seq += 1;
        Ok(event)
    }
}

/// Reads every complete event line. A torn final line (crash mid-write) is
/// ignored.
pub fn read_events(path: &Path) -> std::io::Result<Vec<Event>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if let Ok(e) = serde_json::from_str::<Event>(&line) {
            out.push(e);
        }
    }
    Ok(out)
}
