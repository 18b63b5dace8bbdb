use std::path::PathBuf;

use rust_decimal::Decimal;

use super::*;
use crate::gateway::mock::ScriptEntry;
use crate::orchestrator::demo::{MockBundle, TOPIC};
use crate::orchestrator::events::read_events;
use crate::orchestrator::gate::Scripted;

struct Env {
    _runs: tempfile::TempDir,
    _mock: tempfile::TempDir,
    store: RunStore,
    mock: PathBuf,
}

fn env(bundle: &MockBundle) -> Env {
    let runs = tempfile::tempdir().unwrap();
    let mock = tempfile::tempdir().unwrap();
    bundle.write(mock.path()).unwrap();
    Env { store: RunStore::new(runs.path()), mock: mock.path().to_path_buf(), _runs: runs, _mock: mock }
}

fn spec(e: &Env, id: &str, mode: Mode, cfg: Config) -> RunSpec {
    let mut s = RunSpec::new(ResearchTask::new(TOPIC, mode, 7).unwrap(), cfg);
    s.run_id = Some(id.into());
    s.mock_script = Some(e.mock.clone());
    s
}

fn run(e: &Env, id: &str, mode: Mode, cfg: Config, gate: &mut dyn DecisionSource) -> (RunDir, RunState) {
    run_pipeline(&e.store, spec(e, id, mode, cfg), gate, &mut |_| {}).unwrap()
}

fn proceed(n: usize) -> Scripted {
    Scripted::new(vec![HumanDecision::Proceed; n])
}

fn kinds(dir: &RunDir) -> Vec<(EventKind, Option<PhaseId>)> {
    read_events(&dir.events_path())
        .unwrap()
        .into_iter()
        .map(|e| (e.kind, e.payload.get("phase").and_then(|p| serde_json::from_value(p.clone()).ok())))
        .collect()
}

#[test]
fn autonomous_run_completes_with_consistent_telemetry() {
    let bundle = MockBundle::happy();
    let e = env(&bundle);
    let (dir, state) = run(&e, "happy", Mode::Autonomous, Config::default(), &mut proceed(0));
    assert_eq!(state.status, RunStatus::Complete, "{:?}", state.failure);
    assert_eq!(state.mock_cursor, Some(bundle.script.len()));
    let phases: Vec<PhaseId> = state.telemetry.iter().map(|r| r.phase).collect();
    assert_eq!(phases, PhaseId::ALL);
    assert!(state.telemetry.iter().all(|r| r.succeeded && r.attempts == 1));
    let ledger: Decimal = dir.load_ledger().unwrap().iter().map(|l| l.cost).sum();
    let rows: Decimal = state.telemetry.iter().map(|r| r.cost).sum();
    assert!(ledger > Decimal::ZERO);
    assert_eq!(rows, ledger);
    assert!(state.report_compiled);
    let report = std::fs::read_to_string(dir.report_path()).unwrap();
    assert!(report.contains("scaled centroid rule closes most of the gap"));
    for name in ["literature_review.txt", "plan.txt", "dataset.py", "experiment.py", "interpretation.txt", "reviews.json"] {
        assert!(dir.artifacts().join(name).is_file(), "{name}");
    }
    let output = std::fs::read_to_string(dir.artifacts().join("experiment_output.txt")).unwrap();
    assert!(output.contains("decayed logistic accuracy"), "{output}");
    assert_eq!(kinds(&dir).last().unwrap().0, EventKind::RunCompleted);
    assert!(dir.traces().join("mle_solver.jsonl").is_file());
    assert!(dir.traces().join("paper_solver.jsonl").is_file());
}

#[test]
fn exhausted_literature_review_fails_the_run() {
    let script = (0..4).map(|_| ScriptEntry::text("```SUMMARY\nnothing here\n```")).collect();
    let e = env(&MockBundle { script, fixtures: vec![] });
    let mut cfg = Config::default();
    cfg.max_steps_literature_review = 2;
    let (dir, state) = run(&e, "fails", Mode::Autonomous, cfg, &mut proceed(0));
    assert_eq!(state.status, RunStatus::Failed);
    assert_eq!(state.failed_phase, Some(PhaseId::LiteratureReview));
    assert_eq!(state.attempt(PhaseId::LiteratureReview), 2);
    assert_eq!(state.telemetry.len(), 1);
    assert!(!state.telemetry[0].succeeded);
    let ks = kinds(&dir);
    assert_eq!(ks.iter().filter(|k| k.0 == EventKind::PhaseFailed).count(), 2);
    assert_eq!(ks.last().unwrap().0, EventKind::RunFailed);
    assert!(!ks.iter().any(|k| k.1 == Some(PhaseId::PlanFormulation)));
}

#[test]
fn identical_inputs_give_identical_artifacts() {
    let e = env(&MockBundle::happy());
    let (a, _) = run(&e, "a", Mode::Autonomous, Config::default(), &mut proceed(0));
    let (b, _) = run(&e, "b", Mode::Autonomous, Config::default(), &mut proceed(0));
    let ha = a.artifact_hashes().unwrap();
    assert!(ha.contains_key("artifacts/report.tex"));
    assert!(ha.keys().any(|k| k.starts_with("transcripts/")));
    assert_eq!(ha, b.artifact_hashes().unwrap());
}

/// The happy bundle with the plan phase scripted `extra + 1` times.
fn with_plan_retries(extra: usize) -> MockBundle {
    let mut b = MockBundle::default();
    b.phase(PhaseId::LiteratureReview);
    for _ in 0..=extra {
        b.phase(PhaseId::PlanFormulation);
    }
    for p in &PhaseId::ALL[2..] {
        b.phase(*p);
    }
    b
}

#[test]
fn copilot_retry_reruns_the_phase_with_notes() {
    let e = env(&with_plan_retries(1));
    let note = "include paper 2401.01004v1 in the comparison";
    let mut decisions = vec![HumanDecision::Proceed, HumanDecision::retry(vec![note.into()]).unwrap()];
    decisions.extend(vec![HumanDecision::Proceed; 6]);
    let (dir, state) = run(&e, "retry", Mode::Copilot, Config::default(), &mut Scripted::new(decisions));
    assert_eq!(state.status, RunStatus::Complete, "{:?}", state.failure);
    assert_eq!(state.attempt(PhaseId::PlanFormulation), 2);

    let records = dir.transcript(PhaseId::PlanFormulation).unwrap();
    assert!(records.iter().filter(|r| r.attempt == 1).all(|r| !r.user.contains(note)));
    let second: Vec<_> = records.iter().filter(|r| r.attempt == 2).collect();
    assert_eq!(second.len(), 3);
    assert!(second.iter().all(|r| r.user.contains(note)));

    // data preparation starts only after the plan gate is passed with Proceed
    let events = read_events(&dir.events_path()).unwrap();
    let first_data = events
        .iter()
        .position(|e| e.kind == EventKind::PhaseStarted && e.payload["phase"] == "data_preparation")
        .unwrap();
    let plan_decisions: Vec<_> = events[..first_data]
        .iter()
        .filter(|e| e.kind == EventKind::DecisionApplied && e.payload["phase"] == "plan_formulation")
        .map(|e| e.payload["decision"]["decision"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(plan_decisions, ["retry", "proceed"]);
    let plan_row = state.telemetry.iter().find(|r| r.phase == PhaseId::PlanFormulation).unwrap();
    assert_eq!(plan_row.attempts, 2);
    assert_eq!(state.telemetry.len(), 7);
}

#[test]
fn two_retries_reach_attempt_three() {
    let e = env(&with_plan_retries(2));
    let retry = || HumanDecision::retry(vec!["tighten the plan".into()]).unwrap();
    let mut decisions = vec![HumanDecision::Proceed, retry(), retry()];
    decisions.extend(vec![HumanDecision::Proceed; 6]);
    let (dir, state) = run(&e, "retry3", Mode::Copilot, Config::default(), &mut Scripted::new(decisions));
    assert_eq!(state.status, RunStatus::Complete);
    assert_eq!(state.attempt(PhaseId::PlanFormulation), 3);
    let gates: Vec<String> = read_events(&dir.events_path())
        .unwrap()
        .into_iter()
        .filter(|e| e.kind == EventKind::GateOpened && e.payload["phase"] == "plan_formulation")
        .map(|e| e.payload["gate_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(gates, ["plan_formulation-1", "plan_formulation-2", "plan_formulation-3"]);
}

#[test]
fn revisits_stop_at_the_rewind_budget() {
    // round one and two revisit; the third round has no decision call
    let mut b = MockBundle::default();
    for p in &PhaseId::ALL[..6] {
        b.phase(*p);
    }
    b.refinement(Some(Some(PhaseId::ResultsInterpretation)));
    b.phase(PhaseId::ResultsInterpretation);
    b.phase(PhaseId::ReportWriting);
    b.refinement(Some(Some(PhaseId::ResultsInterpretation)));
    b.phase(PhaseId::ResultsInterpretation);
    b.phase(PhaseId::ReportWriting);
    b.refinement(None);

    let e = env(&b);
    let (dir, state) = run(&e, "revisit", Mode::Autonomous, Config::default(), &mut proceed(0));
    assert_eq!(state.status, RunStatus::Complete, "{:?}", state.failure);
    assert_eq!(state.rewinds_used, 2);
    assert_eq!(state.mock_cursor, Some(b.script.len()));
    assert_eq!(state.telemetry.len(), 13);
    assert_eq!(kinds(&dir).iter().filter(|k| k.0 == EventKind::Rewind).count(), 2);
    assert!(state.previous.as_ref().unwrap().reviewer_response.contains("Reviewer #1"));
    // the second round sees the first one
    let interp = dir.transcript(PhaseId::ResultsInterpretation).unwrap();
    assert!(interp.last().unwrap().user.contains("decayed logistic accuracy"));
}

#[test]
fn interrupted_checkpoint_resumes_identically() {
    let e = env(&MockBundle::happy());
    let (straight, _) = run(&e, "straight", Mode::Copilot, Config::default(), &mut proceed(7));

    let (dir, paused) = run(&e, "paused", Mode::Copilot, Config::default(), &mut proceed(2));
    assert_eq!(paused.status, RunStatus::AwaitingDecision);
    assert_eq!(paused.pending.as_ref().unwrap().gate_id, "data_preparation-1");
    // nothing of the next phase ran while waiting
    assert!(!kinds(&dir).iter().any(|k| k.0 == EventKind::PhaseStarted && k.1 == Some(PhaseId::RunningExperiments)));

    let done = resume(&e.store, "paused", &mut proceed(5), &mut |_| {}).unwrap();
    assert_eq!(done.status, RunStatus::Complete);
    assert_eq!(dir.artifact_hashes().unwrap(), straight.artifact_hashes().unwrap());
    assert_eq!(kinds(&dir).iter().filter(|k| k.0 == EventKind::RunResumed).count(), 1);
}

#[test]
fn resume_edge_cases() {
    let e = env(&MockBundle::happy());
    let err = resume(&e.store, "missing", &mut proceed(0), &mut |_| {}).unwrap_err();
    assert!(matches!(err, PipelineError::Store(StoreError::NotFound(_))), "{err:?}");

    let (dir, state) = run(&e, "done", Mode::Autonomous, Config::default(), &mut proceed(0));
    let before = read_events(&dir.events_path()).unwrap().len();
    let again = resume(&e.store, "done", &mut proceed(0), &mut |_| {}).unwrap();
    assert_eq!(again, dir.load_state().unwrap());
    assert_eq!(again.status, state.status);
    assert_eq!(read_events(&dir.events_path()).unwrap().len(), before);
}

#[test]
fn a_killed_phase_is_replayed_from_its_start() {
    let e = env(&MockBundle::happy());
    let (clean, _) = run(&e, "clean", Mode::Autonomous, Config::default(), &mut proceed(0));

    // simulate a crash right after the literature review started
    let dir = create_run(&e.store, spec(&e, "killed", Mode::Autonomous, Config::default())).unwrap();
    let mut state = dir.load_state().unwrap();
    state.attempts.insert(PhaseId::LiteratureReview, 1);
    state.visit.attempts = 1;
    state.in_flight = Some(1);
    state.mock_cursor = Some(0);
    dir.save_state(&state).unwrap();
    std::fs::create_dir_all(dir.transcripts()).unwrap();
    let partial = serde_json::json!({
        "phase": "literature_review", "attempt": 1, "step": 0, "agent": "phd_student",
        "temperature": 0.8, "system": "s", "user": "u", "response": "half"
    });
    std::fs::write(dir.transcripts().join("literature_review.jsonl"), format!("{partial}\n")).unwrap();

    let done = resume(&e.store, "killed", &mut proceed(0), &mut |_| {}).unwrap();
    assert_eq!(done.status, RunStatus::Complete);
    assert_eq!(done.attempt(PhaseId::LiteratureReview), 1);
    assert_eq!(dir.artifact_hashes().unwrap(), clean.artifact_hashes().unwrap());
}

#[test]
fn invalid_mock_script_is_rejected_before_creating_the_run() {
    let runs = tempfile::tempdir().unwrap();
    let store = RunStore::new(runs.path());
    let bad = runs.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let mut s = RunSpec::new(ResearchTask::new(TOPIC, Mode::Autonomous, 1).unwrap(), Config::default());
    s.run_id = Some("bad".into());
    s.mock_script = Some(bad);
    assert!(matches!(create_run(&store, s), Err(PipelineError::Setup(_))));
    assert!(store.open("bad").is_err());
}

/// The shipped demo bundle stays in sync with the generator. Set
/// `AGENTLAB_BLESS=1` to rewrite it.
#[test]
fn shipped_demo_bundle_is_current() {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/happy");
    let fresh = tempfile::tempdir().unwrap();
    MockBundle::happy().write(fresh.path()).unwrap();
    if std::env::var_os("AGENTLAB_BLESS").is_some() {
        let _ = std::fs::remove_dir_all(&shipped);
        MockBundle::happy().write(&shipped).unwrap();
    }
    let listing = |d: &Path| {
        let mut v: Vec<(String, String)> = std::fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read_to_string(e.path()).unwrap())
            })
            .collect();
        v.sort();
        v
    };
    assert_eq!(listing(&shipped), listing(fresh.path()), "run with AGENTLAB_BLESS=1 to refresh fixtures/happy");
}
