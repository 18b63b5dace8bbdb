//! Literature review: the PhD agent searches arXiv, reads papers, and adds
//! the relevant ones to the review.

use crate::command::CommandKind;
use crate::context::{PhaseCtx, PhaseError};
use crate::output::{PhaseOutput, ReviewedPaper};

use super::{run_agents, Agent, Ended, Role, Turn};

fn parse_add_paper(body: &str) -> Option<ReviewedPaper> {
    let body = body.trim();
    let (id, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
    if id.is_empty() {
        return None;
    }
    Some(ReviewedPaper {
        arxiv_id: id.to_string(),
        summary: rest.trim().to_string(),
    })
}

pub fn literature_review(ctx: &PhaseCtx<'_>, context_prompt: &str) -> Result<PhaseOutput, PhaseError> {
    let cfg = ctx.config;
    let target = cfg.lit_review_paper_target as usize;
    let mut papers: Vec<ReviewedPaper> = Vec::new();
    let mut agents = [Agent::new(Role::PhdStudent, cfg.agent_history_len)];
    let services = ctx.services;

    let ended = run_agents(ctx, &mut agents, context_prompt, cfg.max_steps_literature_review, |_, _, cmd| {
        Ok(match cmd.kind {
            CommandKind::Summary => {
                let query = cmd.body.trim();
                match services.arxiv.search(query, cfg.summaries_per_query as usize) {
                    Ok(found) if found.is_empty() => Turn::result(format!(
                        "You requested arXiv papers related to the query {query}, but no papers were found. Try a different query."
                    )),
                    Ok(found) => Turn::result(format!(
                        "You requested arXiv papers related to the query {query}, here was the response\n{}",
                        found.iter().map(|p| p.render()).collect::<Vec<_>>().join("\n\n")
                    )),
                    Err(e) => Turn::result(format!("The arXiv search for {query} failed: {e}")),
                }
            }
            CommandKind::FullText => {
                let id = cmd.body.trim();
                match services.arxiv.full_text(id, cfg.full_text_budget_chars) {
                    Ok(text) => Turn::Continue {
                        result: format!("You requested the full text of arXiv paper {id}, here is the text:\n{text}"),
                        full_text: true,
                        relay: None,
                    },
                    Err(e) => Turn::result(format!("Could not retrieve the full text of {id}: {e}")),
                }
            }
            CommandKind::AddPaper => match parse_add_paper(&cmd.body) {
                None => Turn::result("ADD_PAPER needs an arXiv paper ID on the first line followed by a summary."),
                Some(p) if papers.iter().any(|q| q.arxiv_id == p.arxiv_id) => {
                    Turn::result(format!("Paper {} is already in the literature review.", p.arxiv_id))
                }
                Some(p) => {
                    let id = p.arxiv_id.clone();
                    papers.push(p);
                    if papers.len() >= target {
                        Turn::Done(())
                    } else {
                        Turn::result(format!(
                            "Successfully added paper {id}. The review now has {} of {target} papers.",
                            papers.len()
                        ))
                    }
                }
            },
            _ => Turn::result(crate::prompts::NO_COMMAND_FEEDBACK),
        })
    })?;

    match ended {
        Ended::Done { .. } => Ok(PhaseOutput::LiteratureReview { papers, degraded: false }),
        Ended::Exhausted if !papers.is_empty() => Ok(PhaseOutput::LiteratureReview { papers, degraded: true }),
        Ended::Exhausted => Err(PhaseError::Failed(format!(
            "no papers added within {} steps",
            cfg.max_steps_literature_review
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::testkit::{config, fence, services};
    use crate::context::MemoryTranscript;
    use crate::phase::PhaseId;
    use crate::task::{Mode, ResearchTask};
    use crate::tools::transport::FixtureTransport;

    fn feed(ids: &[&str]) -> String {
        let mut s = String::from(r#"<feed xmlns="http://www.w3.org/2005/Atom">"#);
        for id in ids {
            s.push_str(&format!("<entry><id>http://arxiv.org/abs/{id}</id><title>T {id}</title><summary>S {id}</summary></entry>"));
        }
        s + "</feed>"
    }

    fn run(script: Vec<crate::gateway::mock::ScriptEntry>, max_steps: u32) -> (Result<PhaseOutput, PhaseError>, Vec<crate::context::TranscriptRecord>) {
        let fixtures = tempfile::tempdir().unwrap();
        let scratch = tempfile::tempdir().unwrap();
        let (svc, _) = services(script, fixtures.path(), scratch.path());
        FixtureTransport::new(fixtures.path())
            .record(&svc.arxiv.search_url("robustness", 20), &feed(&["2401.00001", "2401.00002"]))
            .unwrap();
        let mut cfg = config();
        cfg.max_steps_literature_review = max_steps;
        let task = ResearchTask::new("robust transformers", Mode::Autonomous, 1).unwrap();
        let tr = MemoryTranscript::default();
        let ctx = PhaseCtx {
            services: &svc,
            config: &cfg,
            task: &task,
            phase: PhaseId::LiteratureReview,
            attempt: 1,
            transcript: &tr,
        };
        (literature_review(&ctx, ""), tr.records())
    }

    #[test]
    fn summary_then_five_papers_in_six_steps() {
        let mut script = vec![fence("SUMMARY", "robustness")];
        for i in 1..=5 {
            script.push(fence("ADD_PAPER", &format!("2401.0000{i}\nsummary {i}")));
        }
        let (out, records) = run(script, 100);
        match out.unwrap() {
            PhaseOutput::LiteratureReview { papers, degraded } => {
                assert_eq!(papers.len(), 5);
                assert!(!degraded);
                assert_eq!(papers[2].summary, "summary 3");
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(records.len(), 6);
        // the search result is fed back on the next turn, verbatim
        assert!(records[1].user.contains("Title: T 2401.00001\nSummary: S 2401.00001\narXiv paper ID: 2401.00001"));
        assert!(records[2].user.contains("Successfully added paper 2401.00001"));
    }

    #[test]
    fn endless_summaries_fail_the_phase() {
        let script = (0..4).map(|_| fence("SUMMARY", "robustness")).collect();
        let (out, records) = run(script, 4);
        assert!(matches!(out, Err(PhaseError::Failed(_))));
        assert_eq!(records.len(), 4);
        assert!(records[3].user.contains(crate::prompts::COMPLETE));
    }

    #[test]
    fn partial_review_is_degraded() {
        let script = vec![fence("ADD_PAPER", "9999.99999 never retrieved"), fence("SUMMARY", "robustness")];
        let (out, _) = run(script, 2);
        match out.unwrap() {
            PhaseOutput::LiteratureReview { papers, degraded } => {
                assert!(degraded);
                assert_eq!(papers[0].arxiv_id, "9999.99999");
                assert_eq!(papers[0].summary, "never retrieved");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_command_costs_a_step_and_explains() {
        let script = vec![
            crate::gateway::mock::ScriptEntry::text("I think I will search now."),
            fence("ADD_PAPER", "2401.00001 s"),
        ];
        let (out, records) = run(script, 2);
        assert!(out.is_ok());
        assert!(records[1].user.contains(crate::prompts::NO_COMMAND_FEEDBACK));
    }

    #[test]
    fn full_text_feedback_decays_from_history() {
        let mut script = vec![fence("FULL_TEXT", "2401.00001")];
        for _ in 0..5 {
            script.push(fence("SUMMARY", "robustness"));
        }
        let fixtures = tempfile::tempdir().unwrap();
        let scratch = tempfile::tempdir().unwrap();
        let (svc, _) = services(script, fixtures.path(), scratch.path());
        let ft = FixtureTransport::new(fixtures.path());
        ft.record(&svc.arxiv.full_text_url("2401.00001"), "<p>FULLTEXTMARKER body</p>").unwrap();
        ft.record(&svc.arxiv.search_url("robustness", 20), &feed(&[])).unwrap();
        let mut cfg = config();
        cfg.max_steps_literature_review = 6;
        let task = ResearchTask::new("t", Mode::Autonomous, 1).unwrap();
        let tr = MemoryTranscript::default();
        let ctx = PhaseCtx { services: &svc, config: &cfg, task: &task, phase: PhaseId::LiteratureReview, attempt: 1, transcript: &tr };
        let _ = literature_review(&ctx, "");
        let r = tr.records();
        // step 1 sees the text as feedback; steps 2..4 still carry it in history
        assert!(r[1].user.contains("Feedback: You requested the full text of arXiv paper 2401.00001, here is the text:\nFULLTEXTMARKER body"));
        assert!(r[4].user.contains("FULLTEXTMARKER"));
        // the entry from step 1 is older than three steps at step 5
        assert!(!r[5].user.contains("FULLTEXTMARKER"));
    }
}
