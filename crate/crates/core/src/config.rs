//! Run configuration.
//!
//! Loaded from a flat TOML document whose keys mirror the field names below.
//! Every field is optional in the file; missing fields take the defaults
//! listed here. Unknown keys are rejected so a typo never silently falls back
//! to a default.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::phase::PhaseId;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatexBackend {
    /// In-process structural checker; needs no TeX installation.
    Builtin,
    /// Runs `pdflatex` in a scratch directory.
    Pdflatex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    // literature review
    pub lit_review_paper_target: u32,
    pub summaries_per_query: u32,
    pub full_text_decay_steps: u32,
    pub full_text_budget_chars: usize,
    pub agent_temperature: f64,
    pub agent_history_len: usize,

    // data preparation
    pub dataprep_timeout_secs: u64,

    // running experiments
    pub solver_steps: u32,
    pub repair_attempts: u32,
    pub max_top_codes: usize,
    pub error_history_len: usize,
    pub code_history_len: usize,
    pub comparison_trials: u32,
    pub experiment_timeout_secs: u64,
    pub score_temperature: f64,
    pub repair_temperature: f64,
    pub initial_code_temperature: f64,
    pub solver_temperature: f64,

    // report writing
    pub papersolver_steps: u32,
    pub max_top_papers: usize,
    pub paper_history_len: usize,
    pub writing_reviewers: u32,
    pub paper_solver_temperature: f64,
    pub initial_paper_temperature: f64,
    pub scaffold_attempts: u32,
    pub section_attempts: u32,
    pub search_attempt_cap: u32,

    // report refinement
    pub refinement_reviewers: u32,
    pub rewind_budget: u32,

    // phase control
    pub max_steps_literature_review: u32,
    pub max_steps_plan_formulation: u32,
    pub max_steps_data_preparation: u32,
    pub max_steps_results_interpretation: u32,
    pub completion_nudge_fraction: f64,
    pub phase_retries: u32,
    pub checkpoint_timeout_secs: Option<u64>,

    // tools
    pub interpreter: String,
    pub stdout_budget_chars: usize,
    pub arxiv_min_interval_ms: u64,
    pub latex_compiler: LatexBackend,

    // gateway
    pub model_id: String,
    pub max_output_tokens: Option<u32>,
    pub gateway_max_attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    pub gateway_concurrency: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            lit_review_paper_target: 5,
            summaries_per_query: 20,
            full_text_decay_steps: 3,
            full_text_budget_chars: 100_000,
            agent_temperature: 0.8,
            agent_history_len: 15,

            dataprep_timeout_secs: 120,

            solver_steps: 3,
            repair_attempts: 2,
            max_top_codes: 2,
            error_history_len: 5,
            code_history_len: 2,
            comparison_trials: 2,
            experiment_timeout_secs: 600,
            score_temperature: 0.6,
            repair_temperature: 0.8,
            initial_code_temperature: 1.0,
            solver_temperature: 1.0,

            papersolver_steps: 5,
            max_top_papers: 1,
            paper_history_len: 10,
            writing_reviewers: 1,
            paper_solver_temperature: 1.0,
            initial_paper_temperature: 0.8,
            scaffold_attempts: 3,
            section_attempts: 3,
            search_attempt_cap: 5,

            refinement_reviewers: 3,
            rewind_budget: 2,

            max_steps_literature_review: 100,
            max_steps_plan_formulation: 25,
            max_steps_data_preparation: 25,
            max_steps_results_interpretation: 25,
            completion_nudge_fraction: 0.7,
            phase_retries: 1,
            checkpoint_timeout_secs: None,

            interpreter: "python3".to_string(),
            stdout_budget_chars: 10_000,
            arxiv_min_interval_ms: 3_000,
            latex_compiler: LatexBackend::Builtin,

            model_id: "gpt-4o".to_string(),
            max_output_tokens: None,
            gateway_max_attempts: 5,
            backoff_base_ms: 1_000,
            backoff_cap_ms: 30_000,
            gateway_concurrency: 4,
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let counts: [(&str, u64); 28] = [
            ("lit_review_paper_target", self.lit_review_paper_target.into()),
            ("summaries_per_query", self.summaries_per_query.into()),
            ("full_text_decay_steps", self.full_text_decay_steps.into()),
            ("full_text_budget_chars", self.full_text_budget_chars as u64),
            ("agent_history_len", self.agent_history_len as u64),
            ("dataprep_timeout_secs", self.dataprep_timeout_secs),
            ("solver_steps", self.solver_steps.into()),
            ("repair_attempts", self.repair_attempts.into()),
            ("max_top_codes", self.max_top_codes as u64),
            ("error_history_len", self.error_history_len as u64),
            ("code_history_len", self.code_history_len as u64),
            ("comparison_trials", self.comparison_trials.into()),
            ("experiment_timeout_secs", self.experiment_timeout_secs),
            ("papersolver_steps", self.papersolver_steps.into()),
            ("max_top_papers", self.max_top_papers as u64),
            ("paper_history_len", self.paper_history_len as u64),
            ("writing_reviewers", self.writing_reviewers.into()),
            ("scaffold_attempts", self.scaffold_attempts.into()),
            ("section_attempts", self.section_attempts.into()),
            ("search_attempt_cap", self.search_attempt_cap.into()),
            ("refinement_reviewers", self.refinement_reviewers.into()),
            ("max_steps_literature_review", self.max_steps_literature_review.into()),
            ("max_steps_plan_formulation", self.max_steps_plan_formulation.into()),
            ("max_steps_data_preparation", self.max_steps_data_preparation.into()),
            ("max_steps_results_interpretation", self.max_steps_results_interpretation.into()),
            ("stdout_budget_chars", self.stdout_budget_chars as u64),
            ("gateway_max_attempts", self.gateway_max_attempts.into()),
            ("gateway_concurrency", self.gateway_concurrency as u64),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v < 1) {
            return Err(ConfigError::Invalid(format!("{name} must be at least 1")));
        }
        let temps = [
            ("agent_temperature", self.agent_temperature),
            ("score_temperature", self.score_temperature),
            ("repair_temperature", self.repair_temperature),
            ("initial_code_temperature", self.initial_code_temperature),
            ("solver_temperature", self.solver_temperature),
            ("paper_solver_temperature", self.paper_solver_temperature),
            ("initial_paper_temperature", self.initial_paper_temperature),
        ];
        if let Some((name, t)) = temps.iter().find(|(_, t)| !(0.0..=2.0).contains(t)) {
            return Err(ConfigError::Invalid(format!("{name} = {t} is outside [0, 2]")));
        }
        let f = self.completion_nudge_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "completion_nudge_fraction = {f} is outside (0, 1]"
            )));
        }
        if self.interpreter.trim().is_empty() {
            return Err(ConfigError::Invalid("interpreter must not be empty".into()));
        }
        Ok(())
    }

    /// Step budget for the agent-driven phases. The solver-driven phases are
    /// bounded by their own step counts instead.
    pub fn max_steps(&self, phase: PhaseId) -> u32 {
        match phase {
            PhaseId::LiteratureReview => self.max_steps_literature_review,
            PhaseId::PlanFormulation => self.max_steps_plan_formulation,
            PhaseId::DataPreparation => self.max_steps_data_preparation,
            PhaseId::ResultsInterpretation => self.max_steps_results_interpretation,
            PhaseId::RunningExperiments => self.solver_steps,
            PhaseId::ReportWriting => self.papersolver_steps,
            PhaseId::ReportRefinement => 1,
        }
    }

    /// First step at which the completion nudge is shown:
    /// `ceil(completion_nudge_fraction * max_steps)`.
    pub fn nudge_threshold(&self, max_steps: u32) -> u32 {
        // the epsilon absorbs binary rounding (0.7 * 10 = 7.000000000000001)
        let raw = self.completion_nudge_fraction * f64::from(max_steps);
        (raw - 1e-9).ceil().max(0.0) as u32
    }

    pub fn dataprep_timeout(&self) -> Duration {
        Duration::from_secs(self.dataprep_timeout_secs)
    }

    pub fn experiment_timeout(&self) -> Duration {
        Duration::from_secs(self.experiment_timeout_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_hyperparameter_table() {
        let c = Config::default();
        assert_eq!(c.lit_review_paper_target, 5);
        assert_eq!(c.full_text_decay_steps, 3);
        assert_eq!(c.agent_temperature, 0.8);
        assert_eq!(c.dataprep_timeout_secs, 120);
        assert_eq!(c.solver_steps, 3);
        assert_eq!(c.repair_attempts, 2);
        assert_eq!(c.max_top_codes, 2);
        assert_eq!(c.error_history_len, 5);
        assert_eq!(c.code_history_len, 2);
        assert_eq!(c.comparison_trials, 2);
        assert_eq!(c.experiment_timeout_secs, 600);
        assert_eq!(c.score_temperature, 0.6);
        assert_eq!(c.repair_temperature, 0.8);
        assert_eq!(c.initial_code_temperature, 1.0);
        assert_eq!(c.solver_temperature, 1.0);
        assert_eq!(c.papersolver_steps, 5);
        assert_eq!(c.max_top_papers, 1);
        assert_eq!(c.paper_history_len, 10);
        assert_eq!(c.writing_reviewers, 1);
        assert_eq!(c.refinement_reviewers, 3);
        assert_eq!(c.initial_paper_temperature, 0.8);
        assert_eq!(c.completion_nudge_fraction, 0.7);
        c.validate().unwrap();
    }

    #[test]
    fn partial_override() {
        let c = Config::from_toml_str("solver_steps = 7\nmodel_id = \"mock\"\n").unwrap();
        assert_eq!(c.solver_steps, 7);
        assert_eq!(c.model_id, "mock");
        assert_eq!(c.repair_attempts, 2);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = Config::from_toml_str("solver_stepz = 7\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
    }

    #[test]
    fn range_checks() {
        assert!(Config::from_toml_str("repair_attempts = 0").is_err());
        assert!(Config::from_toml_str("score_temperature = 2.5").is_err());
        assert!(Config::from_toml_str("completion_nudge_fraction = 0.0").is_err());
        assert!(Config::from_toml_str("completion_nudge_fraction = 1.0").is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn nudge_threshold_matches_integer_ceiling() {
        let c = Config::default();
        for max in 1..=200u32 {
            // ceil(7 * max / 10) in exact integer arithmetic
            let oracle = (7 * max).div_ceil(10);
            assert_eq!(c.nudge_threshold(max), oracle, "max_steps = {max}");
        }
    }
}
