//! Bounded per-agent conversation history.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::phase::PhaseId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: u32,
    pub phase: PhaseId,
    pub feedback: String,
    pub response: String,
    /// Set when `feedback` carries a full paper text; such entries expire
    /// after a few steps.
    #[serde(default)]
    pub full_text: bool,
}

impl HistoryEntry {
    pub fn render(&self) -> String {
        format!(
            "Step #{}, Phase: {}, Feedback: {}, Your response: {}",
            self.step, self.phase, self.feedback, self.response
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentHistory {
    entries: VecDeque<HistoryEntry>,
    bound: usize,
    prev_command: String,
}

impl AgentHistory {
    pub fn new(bound: usize) -> Self {
        Self {
            entries: VecDeque::new(),
            bound: bound.max(1),
            prev_command: String::new(),
        }
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn entries(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prev_command(&self) -> &str {
        &self.prev_command
    }

    pub fn set_prev_command(&mut self, cmd: impl Into<String>) {
        self.prev_command = cmd.into();
    }

    /// Appends an entry, dropping the oldest ones past the bound. Entries must
    /// arrive in step order.
    pub fn push(&mut self, entry: HistoryEntry) {
        debug_assert!(self.entries.back().is_none_or(|e| e.step <= entry.step));
        self.entries.push_back(entry);
        while self.entries.len() > self.bound {
            self.entries.pop_front();
        }
    }

    /// Removes expired full-text entries and enforces the length bound.
    pub fn decay(&mut self, current_step: u32, config: &Config) {
        let window = config.full_text_decay_steps;
        self.entries
            .retain(|e| !e.full_text || current_step.saturating_sub(e.step) <= window);
        while self.entries.len() > self.bound {
            self.entries.pop_front();
        }
    }

    /// Pure form of [`AgentHistory::decay`].
    pub fn decayed(&self, current_step: u32, config: &Config) -> AgentHistory {
        let mut out = self.clone();
        out.decay(current_step, config);
        out
    }

    /// History block as injected into the base prompt.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(HistoryEntry::render)
            .collect::<Vec<_>>()
            .join("\n")
    }
}
