//! Two-agent phases: plan formulation, results interpretation, and data
//! preparation.

use crate::command::{CommandKind, Keyword};
use crate::context::{PhaseCtx, PhaseError};
use crate::output::PhaseOutput;
use crate::phase::PhaseId;
use crate::tools::sandbox::ExecJob;

use super::{run_agents, Agent, Ended, Role, Turn};

fn dialogue_relay(from: Role, body: &str) -> String {
    format!("The following is dialogue produced by the {}: {}", from.display(), body.trim())
}

/// Runs a postdoc/PhD conversation until the postdoc submits `terminal`.
/// The postdoc speaks first, so an immediate submission takes one step.
pub fn run_dialogue_phase(ctx: &PhaseCtx<'_>, terminal: Keyword, context_prompt: &str) -> Result<String, PhaseError> {
    debug_assert!(matches!(ctx.phase, PhaseId::PlanFormulation | PhaseId::ResultsInterpretation));
    let cfg = ctx.config;
    let roles = [Role::Postdoc, Role::PhdStudent];
    let mut agents = roles.map(|r| Agent::new(r, cfg.agent_history_len));
    let max_steps = cfg.max_steps(ctx.phase);
    let ended = run_agents(ctx, &mut agents, context_prompt, max_steps, |i, _, cmd| {
        Ok(match cmd.kind {
            CommandKind::Dialogue => Turn::relay(dialogue_relay(roles[i], &cmd.body)),
            k if k.keyword() == terminal => Turn::Done(cmd.body.trim().to_string()),
            _ => Turn::result(crate::prompts::NO_COMMAND_FEEDBACK),
        })
    })?;
    match ended {
        Ended::Done { value, .. } => Ok(value),
        Ended::Exhausted => Err(PhaseError::Failed(format!(
            "no {terminal} submitted within {max_steps} steps"
        ))),
    }
}

pub fn plan_formulation(ctx: &PhaseCtx<'_>, context_prompt: &str) -> Result<PhaseOutput, PhaseError> {
    run_dialogue_phase(ctx, Keyword::Plan, context_prompt).map(|text| PhaseOutput::Plan { text })
}

pub fn results_interpretation(ctx: &PhaseCtx<'_>, context_prompt: &str) -> Result<PhaseOutput, PhaseError> {
    run_dialogue_phase(ctx, Keyword::Interpretation, context_prompt).map(|text| PhaseOutput::Interpretation { text })
}

/// PhD student and ML engineer iterate until the PhD submits dataset code
/// that runs cleanly.
pub fn data_preparation(ctx: &PhaseCtx<'_>, context_prompt: &str) -> Result<PhaseOutput, PhaseError> {
    let cfg = ctx.config;
    let roles = [Role::PhdStudent, Role::MlEngineer];
    let mut agents = roles.map(|r| Agent::new(r, cfg.agent_history_len));
    let max_steps = cfg.max_steps(PhaseId::DataPreparation);
    let timeout = cfg.dataprep_timeout();
    let services = ctx.services;
    let run_code = |code: &str| {
        services
            .executor
            .execute(&ExecJob::new(code, timeout))
            .map_err(|e| PhaseError::Sandbox(e.to_string()))
    };

    let ended = run_agents(ctx, &mut agents, context_prompt, max_steps, |i, _, cmd| {
        Ok(match cmd.kind {
            CommandKind::Dialogue => Turn::relay(dialogue_relay(roles[i], &cmd.body)),
            CommandKind::SubmitCode => {
                let r = run_code(&cmd.body)?;
                match r.error_text(timeout) {
                    None => Turn::Done(PhaseOutput::DatasetCode { code: cmd.body.clone(), output: r.stdout }),
                    Some(err) => Turn::result(format!(
                        "The submitted code did not run cleanly and was not accepted. Fix the error and submit again.\n[CODE EXECUTION ERROR]: {err}\nOutput: {}",
                        r.stdout
                    )),
                }
            }
            CommandKind::ExecuteCode => {
                let r = run_code(&cmd.body)?;
                let rendered = r.render(timeout);
                Turn::Continue {
                    result: format!("Code execution output:\n{rendered}"),
                    full_text: false,
                    relay: Some(format!(
                        "The ML engineer ran the following code:\n{}\nIt produced:\n{rendered}",
                        cmd.body
                    )),
                }
            }
            CommandKind::SearchHub => {
                let q = cmd.body.trim();
                match services.hub.search(q) {
                    Ok(found) if found.is_empty() => Turn::result(format!("No HuggingFace datasets matched {q}.")),
                    Ok(found) => Turn::result(format!(
                        "HuggingFace datasets matching {q}:\n{}",
                        found.iter().map(|d| d.render()).collect::<Vec<_>>().join("\n\n")
                    )),
                    Err(e) => Turn::result(format!("The HuggingFace search for {q} failed: {e}")),
                }
            }
            _ => Turn::result(crate::prompts::NO_COMMAND_FEEDBACK),
        })
    })?;
    match ended {
        Ended::Done { value, .. } => Ok(value),
        Ended::Exhausted => Err(PhaseError::Failed(format!(
            "no runnable dataset code submitted within {max_steps} steps"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::testkit::{config, fence, services};
    use crate::context::{MemoryTranscript, Services, TranscriptRecord};
    use crate::gateway::mock::ScriptEntry;
    use crate::task::{Mode, ResearchTask};
    use crate::tools::transport::FixtureTransport;

    struct Harness {
        svc: Services,
        _dirs: (tempfile::TempDir, tempfile::TempDir),
    }

    fn harness(script: Vec<ScriptEntry>) -> Harness {
        let fixtures = tempfile::tempdir().unwrap();
        let scratch = tempfile::tempdir().unwrap();
        let (svc, _) = services(script, fixtures.path(), scratch.path());
        Harness { svc, _dirs: (fixtures, scratch) }
    }

    fn run<T>(
        h: &Harness,
        phase: PhaseId,
        max_steps: u32,
        f: impl FnOnce(&PhaseCtx<'_>) -> T,
    ) -> (T, Vec<TranscriptRecord>) {
        let mut cfg = config();
        cfg.max_steps_plan_formulation = max_steps;
        cfg.max_steps_data_preparation = max_steps;
        cfg.max_steps_results_interpretation = max_steps;
        let task = ResearchTask::new("t", Mode::Autonomous, 1).unwrap();
        let tr = MemoryTranscript::default();
        let ctx = PhaseCtx { services: &h.svc, config: &cfg, task: &task, phase, attempt: 1, transcript: &tr };
        let out = f(&ctx);
        (out, tr.records())
    }

    #[test]
    fn dialogue_then_plan() {
        let h = harness(vec![
            fence("DIALOGUE", "what model?"),
            fence("DIALOGUE", "logistic regression"),
            fence("PLAN", "use logistic regression"),
        ]);
        let (out, records) = run(&h, PhaseId::PlanFormulation, 25, |c| plan_formulation(c, "ctx"));
        assert_eq!(out.unwrap(), PhaseOutput::Plan { text: "use logistic regression".into() });
        assert_eq!(records.iter().map(|r| r.agent.as_str()).collect::<Vec<_>>(), ["postdoc", "phd_student", "postdoc"]);
        // each relay reaches the partner on its very next turn
        assert!(records[1].user.contains("Feedback: The following is dialogue produced by the postdoctoral researcher: what model?"));
        assert!(records[2].user.contains("Feedback: The following is dialogue produced by the PhD student: logistic regression"));
    }

    #[test]
    fn immediate_plan_is_one_step() {
        let h = harness(vec![fence("PLAN", "p")]);
        let (out, records) = run(&h, PhaseId::PlanFormulation, 25, |c| plan_formulation(c, ""));
        assert!(out.is_ok());
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn plan_from_phd_is_ignored() {
        let h = harness(vec![
            fence("DIALOGUE", "propose something"),
            fence("PLAN", "phd plan"),
            fence("PLAN", "postdoc plan"),
        ]);
        let (out, records) = run(&h, PhaseId::PlanFormulation, 25, |c| plan_formulation(c, ""));
        assert_eq!(out.unwrap(), PhaseOutput::Plan { text: "postdoc plan".into() });
        assert_eq!(records.len(), 3);
    }

    #[test]
    fn budget_exhaustion_fails() {
        let h = harness((0..4).map(|_| fence("DIALOGUE", "chat")).collect());
        let (out, records) = run(&h, PhaseId::ResultsInterpretation, 4, |c| results_interpretation(c, ""));
        assert!(matches!(out, Err(PhaseError::Failed(_))));
        assert_eq!(records.len(), 4);
    }

    #[test]
    fn interpretation_terminal() {
        let h = harness(vec![fence("INTERPRETATION", "accuracy 0.9 beats baseline")]);
        let (out, _) = run(&h, PhaseId::ResultsInterpretation, 25, |c| results_interpretation(c, ""));
        assert_eq!(out.unwrap(), PhaseOutput::Interpretation { text: "accuracy 0.9 beats baseline".into() });
    }

    #[test]
    fn clean_submission_first_try() {
        let h = harness(vec![fence("SUBMIT_CODE", "data = [1, 2, 3]\nprint(len(data))")]);
        let (out, records) = run(&h, PhaseId::DataPreparation, 25, |c| data_preparation(c, ""));
        assert_eq!(
            out.unwrap(),
            PhaseOutput::DatasetCode { code: "data = [1, 2, 3]\nprint(len(data))".into(), output: "3\n".into() }
        );
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn broken_submission_is_rejected_with_error_feedback() {
        let h = harness(vec![
            fence("SUBMIT_CODE", "data = [1, 2"),
            fence("DIALOGUE", "fix it"),
            fence("SUBMIT_CODE", "data = [1, 2]"),
        ]);
        let (out, records) = run(&h, PhaseId::DataPreparation, 25, |c| data_preparation(c, ""));
        assert!(matches!(out.unwrap(), PhaseOutput::DatasetCode { .. }));
        assert_eq!(records.len(), 3);
        assert!(records[2].user.contains("was not accepted"));
        assert!(records[2].user.contains("SyntaxError"));
    }

    #[test]
    fn engineer_tools_feed_back() {
        let h = harness(vec![
            fence("DIALOGUE", "find mnist"),
            fence("SEARCH_HF", "mnist"),
            fence("DIALOGUE", "ok"),
            fence("python", "print('rows', 70000)"),
            fence("SUBMIT_CODE", "print('ready')"),
        ]);
        FixtureTransport::new(h._dirs.0.path())
            .record(
                &h.svc.hub.search_url("mnist"),
                r#"[{"id":"ylecun/mnist","description":"Handwritten digits"}]"#,
            )
            .unwrap();
        let (out, records) = run(&h, PhaseId::DataPreparation, 25, |c| data_preparation(c, ""));
        assert!(out.is_ok());
        // engineer sees its search results on its next turn
        assert!(records[3].user.contains("Dataset ID: ylecun/mnist\nDescription: Handwritten digits"));
        // the PhD sees the engineer's code and output on the turn after it ran
        assert!(records[4].user.contains("print('rows', 70000)"));
        assert!(records[4].user.contains("rows 70000"));
    }

    #[test]
    fn hub_failure_is_feedback_not_crash() {
        let h = harness(vec![fence("DIALOGUE", "search"), fence("SEARCH_HF", "x"), fence("DIALOGUE", "?"), fence("DIALOGUE", "ok")]);
        // no fixture recorded: the transport answers NotFound
        let (out, records) = run(&h, PhaseId::DataPreparation, 4, |c| data_preparation(c, ""));
        assert!(matches!(out, Err(PhaseError::Failed(_))));
        assert!(records[3].user.contains("The HuggingFace search for x failed"));
    }
}
