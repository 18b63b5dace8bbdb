//! Builds the services of a run from its directory.
//!
//! A run with a `mock/` directory is fully offline: the model is the
//! scripted provider and arXiv and the dataset hub are served from fixture
//! files next to the script. Otherwise the HTTP provider is configured from
//! the environment.

use std::sync::Arc;
use std::time::Duration;

use crate::config::Config;
use crate::context::Services;
use crate::gateway::http::HttpProvider;
use crate::gateway::mock::ScriptedProvider;
use crate::gateway::{Gateway, LedgerEntry, PriceTable, Provider};
use crate::mle::{HeldOut, LabeledData, Metric};
use crate::tools::arxiv::ArxivClient;
use crate::tools::hub::HubClient;
use crate::tools::latex::compiler_for;
use crate::tools::sandbox::{CodeExecutor, ExecJob, ExecutionResult, Sandbox, SandboxError};
use crate::tools::transport::{FixtureTransport, HttpTransport, Transport};

use super::store::RunDir;

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("mock script: {0}")]
    Script(#[from] crate::gateway::mock::ScriptError),
    #[error("model provider: {0}")]
    Provider(String),
    #[error("network transport: {0}")]
    Transport(String),
    #[error("held-out data: {0}")]
    HeldOut(String),
}

/// Labeled data plus metric for held-out scoring, as stored in the run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HeldOutSpec {
    pub data: LabeledData,
    pub metric: Metric,
}

pub const HELD_OUT_FILE: &str = "data.json";
pub const TRAIN_FILE: &str = "train.json";

/// Note shown to the data-preparation and experiment agents in held-out
/// runs.
pub const TRAIN_NOTE: &str = "The training split is available in the working directory as train.json, a JSON object with parallel `inputs` and `labels` lists.";

pub struct RunServices {
    pub services: Services,
    pub mock: Option<Arc<ScriptedProvider>>,
    /// The dev split, when the run scores by held-out metric.
    pub held_out: Option<HeldOut>,
}

/// Adds fixed files to every job, e.g. the training split.
struct Staging {
    inner: Sandbox,
    files: Vec<(String, String)>,
}

impl CodeExecutor for Staging {
    fn execute(&self, job: &ExecJob) -> Result<ExecutionResult, SandboxError> {
        let mut job = job.clone();
        let mut stage = self.files.clone();
        stage.append(&mut job.stage);
        job.stage = stage;
        self.inner.execute(&job)
    }
}

pub fn load_held_out(dir: &RunDir, seed: u64) -> Result<Option<(LabeledData, HeldOut)>, SetupError> {
    let path = dir.heldout_dir().join(HELD_OUT_FILE);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(SetupError::HeldOut(e.to_string())),
    };
    let spec: HeldOutSpec = serde_json::from_str(&text).map_err(|e| SetupError::HeldOut(e.to_string()))?;
    let split = HeldOut::split(spec.data, seed, spec.metric).map_err(|e| SetupError::HeldOut(e.to_string()))?;
    Ok(Some(split))
}

pub fn build_services(dir: &RunDir, config: &Config, seed: u64, ledger: Vec<LedgerEntry>) -> Result<RunServices, SetupError> {
    let mock_dir = dir.mock_dir();
    let (provider, mock, arxiv_t, hub_t, interval): (Arc<dyn Provider>, _, Box<dyn Transport>, Box<dyn Transport>, _) =
        if mock_dir.is_dir() {
            let p = Arc::new(ScriptedProvider::load(&mock_dir)?);
            (
                p.clone(),
                Some(p),
                Box::new(FixtureTransport::new(&mock_dir)),
                Box::new(FixtureTransport::new(&mock_dir)),
                Duration::ZERO,
            )
        } else {
            let p = HttpProvider::from_env(&config.model_id).map_err(|e| SetupError::Provider(e.to_string()))?;
            let t = || HttpTransport::new().map_err(|e| SetupError::Transport(e.to_string()));
            (Arc::new(p), None, Box::new(t()?), Box::new(t()?), Duration::from_millis(config.arxiv_min_interval_ms))
        };

    let mut gateway = Gateway::from_config(provider, PriceTable::builtin(), config).with_ledger(ledger);
    if mock.is_some() {
        // scripted failures need no real backoff
        gateway = gateway.with_sleeper(Arc::new(|_| {}));
    }

    let sandbox = Sandbox::new(config.interpreter.clone(), dir.scratch(), config.stdout_budget_chars).with_figures_dir(dir.figures());
    let split = load_held_out(dir, seed)?;
    let (executor, held_out): (Arc<dyn CodeExecutor>, _) = match split {
        Some((train, held)) => {
            let train_json = serde_json::to_string(&train).map_err(|e| SetupError::HeldOut(e.to_string()))?;
            (Arc::new(Staging { inner: sandbox, files: vec![(TRAIN_FILE.to_string(), train_json)] }), Some(held))
        }
        None => (Arc::new(sandbox), None),
    };

    let services = Services {
        gateway: Arc::new(gateway),
        arxiv: Arc::new(ArxivClient::new(arxiv_t, interval)),
        hub: Arc::new(HubClient::new(hub_t)),
        executor,
        latex: Arc::from(compiler_for(config.latex_compiler)),
        model_id: config.model_id.clone(),
        figures_dir: Some(dir.figures()),
    };
    Ok(RunServices { services, mock, held_out })
}
