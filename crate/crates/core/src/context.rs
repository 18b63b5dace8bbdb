//! Shared services and per-phase context handed to agents and solvers.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::phase::PhaseId;
use crate::task::ResearchTask;
use crate::tools::arxiv::ArxivClient;
use crate::tools::hub::HubClient;
use crate::tools::latex::LatexCompiler;
use crate::tools::sandbox::CodeExecutor;

/// Long-lived handles shared by every phase of a run.
#[derive(Clone)]
pub struct Services {
    pub gateway: Arc<Gateway>,
    pub arxiv: Arc<ArxivClient>,
    pub hub: Arc<HubClient>,
    pub executor: Arc<dyn CodeExecutor>,
    pub latex: Arc<dyn LatexCompiler>,
    pub model_id: String,
    /// Where generated figures land; LaTeX graphics resolve against it.
    pub figures_dir: Option<PathBuf>,
}

impl std::fmt::Debug for Services {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Services")
            .field("model_id", &self.model_id)
            .field("latex", &self.latex.name())
            .finish_non_exhaustive()
    }
}

/// One model exchange as persisted in a phase transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub phase: PhaseId,
    pub attempt: u32,
    pub step: u32,
    pub agent: String,
    pub temperature: f64,
    pub system: String,
    pub user: String,
    pub response: String,
}

pub trait TranscriptSink: Send + Sync {
    fn record(&self, record: &TranscriptRecord);
}

/// Keeps records in memory; used by tests and one-off tools.
#[derive(Debug, Default)]
pub struct MemoryTranscript {
    records: Mutex<Vec<TranscriptRecord>>,
}

impl MemoryTranscript {
    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl TranscriptSink for MemoryTranscript {
    fn record(&self, record: &TranscriptRecord) {
        self.records
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(record.clone());
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum PhaseError {
    #[error("phase failed: {0}")]
    Failed(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("code execution unavailable: {0}")]
    Sandbox(String),
}

/// Everything a phase body needs for one attempt.
pub struct PhaseCtx<'a> {
    pub services: &'a Services,
    pub config: &'a Config,
    pub task: &'a ResearchTask,
    pub phase: PhaseId,
    pub attempt: u32,
    pub transcript: &'a dyn TranscriptSink,
}

impl PhaseCtx<'_> {
    /// Sends one request through the gateway and records the exchange.
    pub fn chat(&self, agent: &str, step: u32, system: &str, user: &str, temperature: f64) -> Result<String, GatewayError> {
        let mut req = ChatRequest::new(self.services.model_id.clone(), system, user, temperature);
        req.max_output_tokens = self.config.max_output_tokens;
        let completion = self.services.gateway.complete(&req)?;
        self.transcript.record(&TranscriptRecord {
            phase: self.phase,
            attempt: self.attempt,
            step,
            agent: agent.to_string(),
            temperature,
            system: system.to_string(),
            user: user.to_string(),
            response: completion.text.clone(),
        });
        Ok(completion.text)
    }
}
