//! Report refinement: reviewers grade the report, then the PhD agent
//! decides to finalize or to revisit an earlier phase.

use crate::agents::Role;
use crate::context::{PhaseCtx, PhaseError};
use crate::history::AgentHistory;
use crate::output::{PhaseOutput, RefinementDecision};
use crate::paper::review::{review_paper, Review};
use crate::phase::PhaseId;
use crate::prompts::{render_prompt, AgentContext};

/// Reads the first FINALIZE or REVISIT fence of a response.
pub fn parse_refinement(response: &str) -> Result<RefinementDecision, String> {
    let mut rest = response;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(close) = after.find("```") else { break };
        let block = &after[..close];
        rest = &after[close + 3..];
        let mut lines = block.lines();
        let header = lines.next().unwrap_or("").trim();
        match header {
            "FINALIZE" => return Ok(RefinementDecision::Finalize),
            "REVISIT" => {
                let name = lines.map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
                let phase: PhaseId = name.parse().map_err(|_| {
                    format!("`{name}` is not a phase name; use one of the listed subtask names")
                })?;
                if phase >= PhaseId::ReportRefinement {
                    return Err(format!("{phase} cannot be revisited; pick an earlier subtask"));
                }
                return Ok(RefinementDecision::Revisit { phase });
            }
            _ => {}
        }
    }
    Err("no FINALIZE or REVISIT command found".into())
}

/// Reviews as shown to the PhD agent and carried into a second round.
pub fn render_reviews(reviews: &[Review]) -> String {
    if reviews.is_empty() {
        return "No reviews could be obtained for the report.".into();
    }
    let mut s = String::from("The following are reviews of your report:");
    for (i, r) in reviews.iter().enumerate() {
        let json = serde_json::to_string_pretty(r).unwrap_or_default();
        s.push_str(&format!("\nReviewer #{} (overall {}/10, {:?}):\n{json}", i + 1, r.overall, r.decision));
    }
    s
}

/// Runs the refinement phase. With `may_revisit` false the rewind budget is
/// spent, so the decision call is skipped and the run finalizes.
pub fn report_refinement(
    ctx: &PhaseCtx<'_>,
    context_prompt: &str,
    plan: &str,
    latex: &str,
    may_revisit: bool,
) -> Result<PhaseOutput, PhaseError> {
    let cfg = ctx.config;
    let reviews = review_paper(ctx, 0, plan, latex, cfg.refinement_reviewers);
    if !may_revisit {
        return Ok(PhaseOutput::Refinement { decision: RefinementDecision::Finalize, reviews });
    }
    let role = Role::PhdStudent;
    let history = AgentHistory::new(cfg.agent_history_len);
    let actx = AgentContext {
        role_description: role.description(),
        phase_prompt: role.phase_prompt(ctx.phase).unwrap_or(""),
        command_descriptions: role.command_prompt(ctx.phase).unwrap_or(""),
        context_prompt,
        history: &history,
        max_steps: 1,
    };
    let review_text = render_reviews(&reviews);
    let mut feedback = review_text.clone();
    for trial in 0..=cfg.comparison_trials {
        let prompt = render_prompt(&actx, ctx.phase, 0, &feedback, ctx.task, cfg);
        let response = ctx.chat(role.label(), trial, &prompt.system, &prompt.user, cfg.agent_temperature)?;
        match parse_refinement(&response) {
            Ok(decision) => return Ok(PhaseOutput::Refinement { decision, reviews }),
            Err(e) => feedback = format!("{review_text}\nYour previous answer could not be used: {e}"),
        }
    }
    log::warn!("no usable refinement decision; finalizing");
    Ok(PhaseOutput::Refinement { decision: RefinementDecision::Finalize, reviews })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decisions() {
        assert_eq!(parse_refinement("```FINALIZE\ngood enough\n```"), Ok(RefinementDecision::Finalize));
        assert_eq!(
            parse_refinement("thinking...\n```REVISIT\nplan formulation\nweak plan\n```"),
            Ok(RefinementDecision::Revisit { phase: PhaseId::PlanFormulation })
        );
        assert_eq!(
            parse_refinement("```REVISIT\n\nrunning_experiments\n```\n```FINALIZE\n```"),
            Ok(RefinementDecision::Revisit { phase: PhaseId::RunningExperiments })
        );
        // unrelated fences before the command are skipped
        assert_eq!(parse_refinement("```python\nx\n```\n```FINALIZE\nok\n```"), Ok(RefinementDecision::Finalize));
    }

    #[test]
    fn rejections() {
        assert!(parse_refinement("finalize please").is_err());
        assert!(parse_refinement("```REVISIT\nreport refinement\n```").is_err());
        assert!(parse_refinement("```REVISIT\nthe beginning\n```").is_err());
        assert!(parse_refinement("```FINALIZE\nunterminated").is_err());
    }

    #[test]
    fn review_rendering() {
        assert!(render_reviews(&[]).contains("No reviews"));
        let r: Review = serde_json::from_str(include_str!("../../fixtures/example_review.json")).unwrap();
        let text = render_reviews(&[r]);
        assert!(text.contains("Reviewer #1 (overall 7/10, Accept)"));
    }
}
