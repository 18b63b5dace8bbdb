use serde_json::Value;

use super::*;
use crate::agents::testkit::{config, fence, services};
use crate::config::Config;
use crate::context::{MemoryTranscript, Services, TranscriptRecord};
use crate::gateway::mock::ScriptEntry;
use crate::paper::doc::tests::scaffold;
use crate::phase::PhaseId;
use crate::task::{Mode, ResearchTask};
use crate::tools::transport::FixtureTransport;

const EXAMPLE: &str = include_str!("../../../fixtures/example_review.json");

fn review(overall: u8) -> ScriptEntry {
    let mut v: Value = serde_json::from_str(EXAMPLE).unwrap();
    v["Overall"] = overall.into();
    ScriptEntry::text(format!("THOUGHT:\nok\n\nREVIEW JSON:\n```json\n{v}\n```"))
}

fn section(text: &str) -> ScriptEntry {
    fence("REPLACE", text)
}

struct Harness {
    svc: Services,
    cfg: Config,
    fixtures: tempfile::TempDir,
    _scratch: tempfile::TempDir,
}

fn harness(script: Vec<ScriptEntry>) -> Harness {
    let fixtures = tempfile::tempdir().unwrap();
    let scratch = tempfile::tempdir().unwrap();
    let (svc, _) = services(script, fixtures.path(), scratch.path());
    let mut cfg = config();
    cfg.search_attempt_cap = 1;
    cfg.papersolver_steps = 2;
    Harness { svc, cfg, fixtures, _scratch: scratch }
}

fn with_solver<T>(h: &Harness, f: impl FnOnce(&PaperSolver<'_, '_>) -> T) -> (T, Vec<TranscriptRecord>) {
    let task = ResearchTask::new("word order sensitivity", Mode::Autonomous, 1).unwrap();
    let tr = MemoryTranscript::default();
    let ctx = PhaseCtx { services: &h.svc, config: &h.cfg, task: &task, phase: PhaseId::ReportWriting, attempt: 1, transcript: &tr };
    let inputs = ReportInputs {
        plan: "plan",
        lit_review: "lit",
        exp_code: "code",
        exp_results: "results",
        insights: "insights",
        figures: &[],
    };
    let out = f(&PaperSolver::new(&ctx, inputs));
    (out, tr.records())
}

/// Scaffold plus all eight sections, with one search query per citing section.
fn drafting_script() -> Vec<ScriptEntry> {
    let mut s = vec![fence("REPLACE", &scaffold())];
    for sec in SectionId::ALL {
        if CITING_SECTIONS.contains(&sec) {
            s.push(ScriptEntry::text(format!("{} query", sec.title())));
        }
        s.push(section(&format!("Text of the {} section.", sec.title())));
    }
    s
}

#[test]
fn valid_scaffold_first_try() {
    let h = harness(vec![fence("REPLACE", &scaffold())]);
    let ((doc, attempts), records) = with_solver(&h, |s| s.build_scaffold().unwrap());
    assert_eq!(attempts, 1);
    assert_eq!(doc.sections().len(), 8);
    assert!(records[0].system.contains("Your title should start with Research Report:"));
    assert_eq!(records[0].temperature, 0.8);
}

#[test]
fn broken_then_valid_scaffold() {
    let broken = scaffold().replace("\\end{document}", "");
    let h = harness(vec![fence("REPLACE", &broken), fence("REPLACE", &scaffold())]);
    let ((_, attempts), records) = with_solver(&h, |s| s.build_scaffold().unwrap());
    assert_eq!(attempts, 2);
    assert!(records[1].user.contains("The previous scaffold was rejected"));
}

#[test]
fn scaffold_missing_a_section_is_regenerated() {
    let missing = scaffold().replace("\\section{Background}\n(BACKGROUND HERE)\n", "");
    let h = harness(vec![fence("REPLACE", &missing), fence("REPLACE", &missing), fence("REPLACE", &missing)]);
    let (res, records) = with_solver(&h, |s| s.build_scaffold());
    assert!(matches!(res, Err(PaperError::ScaffoldFailed { attempts: 3, .. })));
    assert!(records[1].user.contains("section Background is missing"));
}

#[test]
fn search_returns_fixture_summaries() {
    let mut h = harness(vec![ScriptEntry::text("\"word order bias\"")]);
    h.cfg.search_attempt_cap = 5;
    let feed = r#"<feed xmlns="http://www.w3.org/2005/Atom"><entry><id>http://arxiv.org/abs/2308.11483v1</id><title>Order</title><summary>Bias.</summary></entry></feed>"#;
    FixtureTransport::new(h.fixtures.path())
        .record(&h.svc.arxiv.search_url("word order bias", SECTION_SEARCH_RESULTS), feed)
        .unwrap();
    let (found, records) = with_solver(&h, |s| s.section_search(SectionId::RelatedWork).unwrap());
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].arxiv_id, "2308.11483v1");
    assert_eq!(records.len(), 1);
    assert!(records[0].system.contains("You must find papers for the section Related Work"));
}

#[test]
fn search_gives_up_after_five_queries() {
    let mut h = harness((0..6).map(|i| ScriptEntry::text(format!("q{i}"))).collect());
    h.cfg.search_attempt_cap = 5;
    let (found, records) = with_solver(&h, |s| s.section_search(SectionId::RelatedWork).unwrap());
    assert!(found.is_empty());
    assert_eq!(records.len(), 5);
    assert!(records[4].user.contains("q0; q1; q2; q3"));
}

#[test]
fn abstract_generation() {
    let h = harness(vec![section("We study word order.")]);
    let doc = PaperDoc::parse(&scaffold()).unwrap();
    let (next, records) = with_solver(&h, |s| s.generate_section(&doc, SectionId::Abstract, &[]).unwrap());
    assert!(!next.has_placeholder(SectionId::Abstract));
    assert!(next.source().contains("\\begin{abstract}\nWe study word order.\n\\end{abstract}"));
    assert!(records[0].system.contains("This should be one continuous paragraph"));
}

#[test]
fn section_with_stray_header_or_percent_is_retried() {
    let h = harness(vec![
        section("\\section{Intro}\nText."),
        section("Accuracy rose by 5% overall."),
        section("Accuracy rose by 5\\% overall."),
    ]);
    let doc = PaperDoc::parse(&scaffold()).unwrap();
    let (next, records) = with_solver(&h, |s| s.generate_section(&doc, SectionId::Results, &[]).unwrap());
    assert!(next.source().contains("5\\% overall"));
    assert!(records[1].user.contains("\\section"));
    assert!(records[2].user.contains("unescaped %"));
}

#[test]
fn section_fails_after_bounded_attempts() {
    let h = harness((0..3).map(|_| section("{unbalanced")).collect());
    let doc = PaperDoc::parse(&scaffold()).unwrap();
    let (res, _) = with_solver(&h, |s| s.generate_section(&doc, SectionId::Methods, &[]));
    assert!(matches!(res, Err(PaperError::SectionFailed { section: SectionId::Methods, .. })));
}

#[test]
fn edits_are_compile_gated() {
    let h = harness(vec![]);
    let doc = PaperDoc::parse(&scaffold()).unwrap();
    let line = doc.lines().iter().position(|l| l == "(METHODS HERE)").unwrap();
    let (results, _) = with_solver(&h, |s| {
        let ok = s.edit_paper(&doc, &Command::new(CommandKind::Edit { from: line, to: line }, "New methods text."));
        let bad = s.edit_paper(&doc, &Command::new(CommandKind::Edit { from: line, to: line }, "{broken"));
        let zero = s.edit_paper(&doc, &Command::new(CommandKind::Edit { from: 0, to: 0 }, "\\documentclass{article}"));
        let range = s.edit_paper(&doc, &Command::new(CommandKind::Edit { from: 5, to: 4 }, "x"));
        (ok, bad, zero, range)
    });
    assert!(results.0.unwrap().source().contains("New methods text."));
    assert!(matches!(results.1, Err(EditRejected::Compile(_))));
    assert_eq!(results.2.unwrap(), doc);
    assert!(matches!(results.3, Err(EditRejected::Range(_))));
}

#[test]
fn keeps_the_best_reviewed_document() {
    let mut script = drafting_script();
    script.push(review(5));
    script.push(fence("EDIT 10 10", "Improved introduction."));
    script.push(review(7));
    script.push(fence("EDIT 10 10", "Worse introduction."));
    script.push(review(6));
    let h = harness(script);
    let (res, records) = with_solver(&h, |s| s.solve().unwrap());
    assert_eq!(res.score, Some(7.0));
    assert!(res.doc.source().contains("Improved introduction."));
    assert_eq!(res.reviews[0].overall, 7);
    let best: Vec<Option<f64>> = res.trace.iter().map(|t| t.best_score).collect();
    assert_eq!(best, [Some(7.0), Some(7.0)]);
    assert!(best.windows(2).all(|w| w[0] <= w[1]));
    // the second edit starts from the retained document and sees its score
    let last_edit = records.iter().rev().find(|r| r.agent == "paper_solver").unwrap();
    assert!(last_edit.user.contains("Current review score: 7"));
    assert!(last_edit.system.contains("10 |Improved introduction."));
}

#[test]
fn rejected_edits_fall_back_to_the_drafted_document() {
    let mut script = drafting_script();
    script.push(review(4));
    script.push(fence("EDIT 10 10", "{broken"));
    script.push(ScriptEntry::text("no command"));
    let h = harness(script);
    let (res, records) = with_solver(&h, |s| s.solve().unwrap());
    assert!(res.doc.source().contains("Text of the Introduction section."));
    assert_eq!(res.score, Some(4.0));
    assert!(res.trace.iter().all(|t| !t.committed));
    assert!(records.last().unwrap().user.contains("The previous command failed"));
}
