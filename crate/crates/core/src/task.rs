//! The run's root input: a research topic plus per-phase notes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::phase::PhaseId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Autonomous,
    #[serde(alias = "co_pilot", alias = "co-pilot")]
    Copilot,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "autonomous" => Ok(Mode::Autonomous),
            "copilot" | "co-pilot" | "co_pilot" => Ok(Mode::Copilot),
            other => Err(format!("unknown mode `{other}` (expected autonomous or copilot)")),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("research topic must not be empty")]
    EmptyTopic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchTask {
    topic: String,
    #[serde(default)]
    notes: BTreeMap<PhaseId, Vec<String>>,
    mode: Mode,
    seed: u64,
}

impl ResearchTask {
    pub fn new(topic: impl Into<String>, mode: Mode, seed: u64) -> Result<Self, TaskError> {
        let topic = topic.into();
        if topic.trim().is_empty() {
            return Err(TaskError::EmptyTopic);
        }
        Ok(Self {
            topic,
            notes: BTreeMap::new(),
            mode,
            seed,
        })
    }

    pub fn with_notes(mut self, notes: BTreeMap<PhaseId, Vec<String>>) -> Self {
        self.notes = notes;
        self
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn notes(&self) -> &BTreeMap<PhaseId, Vec<String>> {
        &self.notes
    }

    pub fn phase_notes(&self, phase: PhaseId) -> &[String] {
        self.notes.get(&phase).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn add_notes(&mut self, phase: PhaseId, notes: impl IntoIterator<Item = String>) {
        self.notes.entry(phase).or_default().extend(notes);
    }
}
