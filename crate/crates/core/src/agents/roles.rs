//! Agent roles and the prompt/command set each role uses in each phase.

use serde::{Deserialize, Serialize};

use crate::command::{Grammar, Keyword};
use crate::phase::PhaseId;
use crate::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    PhdStudent,
    Postdoc,
    MlEngineer,
    SwEngineer,
    Professor,
    Reviewer,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::PhdStudent => "phd_student",
            Role::Postdoc => "postdoc",
            Role::MlEngineer => "ml_engineer",
            Role::SwEngineer => "sw_engineer",
            Role::Professor => "professor",
            Role::Reviewer => "reviewer",
        }
    }

    /// How other agents refer to this one in relayed dialogue.
    pub fn display(self) -> &'static str {
        match self {
            Role::PhdStudent => "PhD student",
            Role::Postdoc => "postdoctoral researcher",
            Role::MlEngineer => "ML engineer",
            Role::SwEngineer => "software engineer",
            Role::Professor => "professor",
            Role::Reviewer => "reviewer",
        }
    }

    /// Description slotted after "You are " in the system prompt.
    pub fn description(self) -> &'static str {
        match self {
            Role::PhdStudent => prompts::ROLE_PHD,
            Role::Postdoc => prompts::ROLE_POSTDOC,
            Role::MlEngineer => prompts::ROLE_ML_ENGINEER,
            Role::SwEngineer => prompts::ROLE_SW_ENGINEER,
            Role::Professor => prompts::ROLE_PROFESSOR,
            Role::Reviewer => prompts::ROLE_REVIEWER,
        }
    }

    pub fn phase_prompt(self, phase: PhaseId) -> Option<&'static str> {
        use PhaseId::*;
        Some(match (self, phase) {
            (Role::PhdStudent, LiteratureReview) => prompts::PHD_LIT_REVIEW,
            (Role::PhdStudent, PlanFormulation) => prompts::PHD_PLAN,
            (Role::PhdStudent, DataPreparation) => prompts::PHD_DATA_PREP,
            (Role::PhdStudent, ResultsInterpretation) => prompts::PHD_INTERPRETATION,
            (Role::PhdStudent, ReportRefinement) => prompts::PHD_REFINEMENT,
            (Role::Postdoc, PlanFormulation) => prompts::POSTDOC_PLAN,
            (Role::Postdoc, ResultsInterpretation) => prompts::POSTDOC_INTERPRETATION,
            (Role::MlEngineer, DataPreparation) => prompts::ML_ENGINEER_DATA_PREP,
            _ => return None,
        })
    }

    pub fn command_prompt(self, phase: PhaseId) -> Option<&'static str> {
        use PhaseId::*;
        Some(match (self, phase) {
            (Role::PhdStudent, LiteratureReview) => prompts::CMD_PHD_LIT_REVIEW,
            (Role::PhdStudent, PlanFormulation) => prompts::CMD_PHD_PLAN,
            (Role::PhdStudent, DataPreparation) => prompts::CMD_PHD_DATA_PREP,
            (Role::PhdStudent, ResultsInterpretation) => prompts::CMD_PHD_INTERPRETATION,
            (Role::PhdStudent, ReportRefinement) => prompts::CMD_PHD_REFINEMENT,
            (Role::Postdoc, PlanFormulation) => prompts::CMD_POSTDOC_PLAN,
            (Role::Postdoc, ResultsInterpretation) => prompts::CMD_POSTDOC_INTERPRETATION,
            (Role::MlEngineer, DataPreparation) => prompts::CMD_ML_ENGINEER_DATA_PREP,
            _ => return None,
        })
    }

    /// Commands this role may issue in `phase`. Anything else is inert.
    pub fn grammar(self, phase: PhaseId) -> Grammar {
        use Keyword::*;
        use PhaseId::*;
        let keywords: &[Keyword] = match (self, phase) {
            (Role::PhdStudent, LiteratureReview) => &[Summary, FullText, AddPaper],
            (Role::PhdStudent, PlanFormulation) => &[Dialogue],
            (Role::PhdStudent, DataPreparation) => &[Dialogue, SubmitCode],
            (Role::PhdStudent, ResultsInterpretation) => &[Dialogue],
            (Role::Postdoc, PlanFormulation) => &[Dialogue, Plan],
            (Role::Postdoc, ResultsInterpretation) => &[Dialogue, Interpretation],
            (Role::MlEngineer, DataPreparation) => &[ExecuteCode, SearchHub, Dialogue],
            _ => &[],
        };
        Grammar::new(keywords.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKFLOW: &[(Role, PhaseId)] = &[
        (Role::PhdStudent, PhaseId::LiteratureReview),
        (Role::PhdStudent, PhaseId::PlanFormulation),
        (Role::Postdoc, PhaseId::PlanFormulation),
        (Role::PhdStudent, PhaseId::DataPreparation),
        (Role::MlEngineer, PhaseId::DataPreparation),
        (Role::PhdStudent, PhaseId::ResultsInterpretation),
        (Role::Postdoc, PhaseId::ResultsInterpretation),
    ];

    #[test]
    fn every_workflow_pair_has_prompts_and_commands() {
        for &(role, phase) in WORKFLOW {
            assert!(role.phase_prompt(phase).is_some(), "{role:?} {phase}");
            assert!(role.command_prompt(phase).is_some(), "{role:?} {phase}");
            assert!(!role.grammar(phase).keywords().is_empty(), "{role:?} {phase}");
        }
    }

    #[test]
    fn grammar_keywords_are_described_in_the_command_prompt() {
        for &(role, phase) in WORKFLOW {
            let text = role.command_prompt(phase).unwrap();
            for k in role.grammar(phase).keywords() {
                assert!(text.contains(k.as_str()), "{role:?} {phase} lacks {k}");
            }
        }
    }

    #[test]
    fn only_postdoc_submits_plans() {
        assert!(Role::Postdoc.grammar(PhaseId::PlanFormulation).allows(Keyword::Plan));
        assert!(!Role::PhdStudent.grammar(PhaseId::PlanFormulation).allows(Keyword::Plan));
        assert!(Role::PhdStudent.grammar(PhaseId::DataPreparation).allows(Keyword::SubmitCode));
        assert!(!Role::MlEngineer.grammar(PhaseId::DataPreparation).allows(Keyword::SubmitCode));
    }
}
