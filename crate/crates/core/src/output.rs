//! What each phase hands to the ones after it.

use serde::{Deserialize, Serialize};

use crate::paper::review::Review;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewedPaper {
    pub arxiv_id: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub code: String,
    pub output: String,
    pub score: f64,
    #[serde(default)]
    pub figures: Vec<String>,
    /// Pool maximum after each solver step.
    #[serde(default)]
    pub score_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub latex: String,
    pub reviews: Vec<Review>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision")]
pub enum RefinementDecision {
    Finalize,
    Revisit { phase: crate::phase::PhaseId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum PhaseOutput {
    LiteratureReview {
        papers: Vec<ReviewedPaper>,
        /// Set when the step budget ran out before the paper target was met.
        degraded: bool,
    },
    Plan {
        text: String,
    },
    DatasetCode {
        code: String,
        output: String,
    },
    Experiments(ExperimentOutput),
    Interpretation {
        text: String,
    },
    Report(ReportOutput),
    Refinement {
        decision: RefinementDecision,
        reviews: Vec<Review>,
    },
}

impl PhaseOutput {
    /// Text form used in context prompts and gate summaries.
    pub fn render(&self) -> String {
        match self {
            PhaseOutput::LiteratureReview { papers, .. } => render_review(papers),
            PhaseOutput::Plan { text } | PhaseOutput::Interpretation { text } => text.clone(),
            PhaseOutput::DatasetCode { code, .. } => code.clone(),
            PhaseOutput::Experiments(e) => format!("Best score: {}\n{}", e.score, e.code),
            PhaseOutput::Report(r) => r.latex.clone(),
            PhaseOutput::Refinement { decision, .. } => match decision {
                RefinementDecision::Finalize => "finalize".to_string(),
                RefinementDecision::Revisit { phase } => format!("revisit {phase}"),
            },
        }
    }
}

pub fn render_review(papers: &[ReviewedPaper]) -> String {
    papers
        .iter()
        .map(|p| format!("arXiv ID: {}, Summary: {}", p.arxiv_id, p.summary))
        .collect::<Vec<_>>()
        .join("\n")
}
