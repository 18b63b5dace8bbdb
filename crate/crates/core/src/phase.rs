//! The seven ordered pipeline phases.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One stage of a research run, ordered as the pipeline executes them.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PhaseId {
    LiteratureReview,
    PlanFormulation,
    DataPreparation,
    RunningExperiments,
    ResultsInterpretation,
    ReportWriting,
    ReportRefinement,
}

impl PhaseId {
    pub const ALL: [PhaseId; 7] = [
        PhaseId::LiteratureReview,
        PhaseId::PlanFormulation,
        PhaseId::DataPreparation,
        PhaseId::RunningExperiments,
        PhaseId::ResultsInterpretation,
        PhaseId::ReportWriting,
        PhaseId::ReportRefinement,
    ];

    /// Human-readable name, as it appears in prompts.
    pub fn name(self) -> &'static str {
        match self {
            PhaseId::LiteratureReview => "literature review",
            PhaseId::PlanFormulation => "plan formulation",
            PhaseId::DataPreparation => "data preparation",
            PhaseId::RunningExperiments => "running experiments",
            PhaseId::ResultsInterpretation => "results interpretation",
            PhaseId::ReportWriting => "report writing",
            PhaseId::ReportRefinement => "report refinement",
        }
    }

    /// Identifier used in file names, config keys and the control API.
    pub fn slug(self) -> &'static str {
        match self {
            PhaseId::LiteratureReview => "literature_review",
            PhaseId::PlanFormulation => "plan_formulation",
            PhaseId::DataPreparation => "data_preparation",
            PhaseId::RunningExperiments => "running_experiments",
            PhaseId::ResultsInterpretation => "results_interpretation",
            PhaseId::ReportWriting => "report_writing",
            PhaseId::ReportRefinement => "report_refinement",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<PhaseId> {
        PhaseId::ALL.get(self.index() + 1).copied()
    }

    pub fn first() -> PhaseId {
        PhaseId::LiteratureReview
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown phase `{0}`")]
pub struct UnknownPhase(pub String);

impl FromStr for PhaseId {
    type Err = UnknownPhase;

    /// Accepts the slug, the prompt name, or either with `-` separators.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c })
            .collect();
        PhaseId::ALL
            .into_iter()
            .find(|p| p.slug() == norm)
            .ok_or_else(|| UnknownPhase(s.to_string()))
    }
}
