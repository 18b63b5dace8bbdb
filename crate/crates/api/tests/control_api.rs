use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use agentlab::config::Config;
use agentlab::orchestrator::demo::{MockBundle, TOPIC};
use agentlab::orchestrator::gate::{HumanDecision, Mailbox, Scripted};
use agentlab::orchestrator::pipeline::{resume, run_pipeline, RunSpec};
use agentlab::orchestrator::state::RunStatus;
use agentlab::orchestrator::store::RunStore;
use agentlab::task::{Mode, ResearchTask};
use agentlab_api::{router, ApiState};

struct Fixture {
    _tmp: tempfile::TempDir,
    store: RunStore,
    mock: std::path::PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let mock = tmp.path().join("mock");
    MockBundle::happy().write(&mock).unwrap();
    Fixture { store: RunStore::new(tmp.path().join("runs")), mock, _tmp: tmp }
}

impl Fixture {
    /// Starts a run and lets `decisions` answer its checkpoints; the run
    /// stops at the first checkpoint left unanswered.
    fn start(&self, id: &str, mode: Mode, decisions: Vec<HumanDecision>) -> RunStatus {
        let mut spec = RunSpec::new(ResearchTask::new(TOPIC, mode, 7).unwrap(), Config::default());
        spec.run_id = Some(id.into());
        spec.mock_script = Some(self.mock.clone());
        let (_, state) = run_pipeline(&self.store, spec, &mut Scripted::new(decisions), &mut |_| {}).unwrap();
        state.status
    }

    fn app(&self) -> Router {
        router(ApiState::new(self.store.clone()).with_poll_interval(Duration::from_millis(10)))
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

/// `(id, kind)` of every message in an SSE body.
fn sse_messages(text: &str) -> Vec<(u64, String)> {
    let mut out = Vec::new();
    for block in text.split("\n\n") {
        let field = |name: &str| block.lines().find_map(|l| l.strip_prefix(name).map(|v| v.trim().to_string()));
        if let (Some(id), Some(kind)) = (field("id:"), field("event:")) {
            out.push((id.parse().unwrap(), kind));
        }
    }
    out
}

#[tokio::test]
async fn read_endpoints_on_a_finished_run() {
    let f = fixture();
    assert_eq!(f.start("done", Mode::Autonomous, vec![]), RunStatus::Complete);
    let app = f.app();

    let (s, runs) = call(&app, "GET", "/runs", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(runs[0]["run_id"], "done");
    assert_eq!(runs[0]["status"], "complete");
    assert_eq!(runs[0]["topic"], TOPIC);

    let (s, state) = call(&app, "GET", "/runs/done", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(state["telemetry"].as_array().unwrap().len(), 7);

    let (s, out) = call(&app, "GET", "/runs/done/phases/plan_formulation/output", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(out["rendered"].as_str().unwrap().contains("Gaussian features"));

    let (s, tel) = call(&app, "GET", "/runs/done/telemetry", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tel["rows"].as_array().unwrap().len(), 7);
    assert_eq!(tel["totals"]["attempts"], 7);

    let (s, tr) = call(&app, "GET", "/runs/done/transcripts/plan-formulation", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tr.as_array().unwrap().len(), 3);

    assert_eq!(call(&app, "GET", "/runs/nope", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/runs/done/phases/lunch/output", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "GET", "/runs/bad..id", None).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn missing_output_is_not_found() {
    let f = fixture();
    assert_eq!(f.start("wait", Mode::Copilot, vec![]), RunStatus::AwaitingDecision);
    let (s, _) = call(&f.app(), "GET", "/runs/wait/phases/report_writing/output", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn decisions_are_validated_and_idempotent() {
    let f = fixture();
    assert_eq!(f.start("gate", Mode::Copilot, vec![]), RunStatus::AwaitingDecision);
    let app = f.app();
    let uri = "/runs/gate/decisions";

    let (s, body) = call(&app, "POST", uri, Some(json!({"phase": "plan_formulation", "decision": "proceed"}))).await;
    assert_eq!(s, StatusCode::CONFLICT, "{body}");
    let (s, _) = call(&app, "POST", uri, Some(json!({"phase": "literature_review", "decision": "retry", "notes": []}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", uri, Some(json!({"phase": "literature_review", "decision": "maybe"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", uri, Some(json!({"run_id": "other", "phase": "literature_review", "decision": "proceed"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let first = json!({"decision_id": "d1", "run_id": "gate", "phase": "literature_review", "decision": "proceed"});
    let (s, body) = call(&app, "POST", uri, Some(first.clone())).await;
    assert_eq!(s, StatusCode::CREATED, "{body}");
    assert_eq!(body["duplicate"], false);
    assert_eq!(body["decision"]["gate_id"], "literature_review-1");

    let (s, body) = call(&app, "POST", uri, Some(first)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["duplicate"], true);

    let other = json!({"decision_id": "d2", "phase": "literature_review", "decision": "retry", "notes": ["more papers"]});
    assert_eq!(call(&app, "POST", uri, Some(other)).await.0, StatusCode::CONFLICT);

    // the driver picks up the recorded decision
    let store = f.store.clone();
    let state = tokio::task::spawn_blocking(move || {
        resume(&store, "gate", &mut Mailbox::new(Some(Duration::ZERO)), &mut |_| {}).unwrap()
    })
    .await
    .unwrap();
    assert_eq!(state.status, RunStatus::Complete);
    let sources: Vec<Value> = agentlab::orchestrator::events::read_events(&f.store.open("gate").unwrap().events_path())
        .unwrap()
        .into_iter()
        .filter(|e| e.payload.get("source").is_some())
        .map(|e| e.payload["source"].clone())
        .collect();
    // the rest of the checkpoints time out into Proceed
    assert_eq!(sources, ["api", "timeout", "timeout", "timeout", "timeout", "timeout", "timeout"]);
}

#[tokio::test]
async fn concurrent_submissions_have_one_winner() {
    let f = fixture();
    assert_eq!(f.start("race", Mode::Copilot, vec![]), RunStatus::AwaitingDecision);
    let app = f.app();
    let mut handles = Vec::new();
    for i in 0..8 {
        let app = app.clone();
        handles.push(tokio::spawn(async move {
            let body = json!({"decision_id": format!("d{i}"), "phase": "literature_review", "decision": "retry", "notes": [format!("note {i}")]});
            call(&app, "POST", "/runs/race/decisions", Some(body)).await.0
        }));
    }
    let mut codes = Vec::new();
    for h in handles {
        codes.push(h.await.unwrap());
    }
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::CREATED).count(), 1, "{codes:?}");
    assert_eq!(codes.iter().filter(|c| **c == StatusCode::CONFLICT).count(), 7, "{codes:?}");
}

#[tokio::test]
async fn event_stream_replays_a_finished_run() {
    let f = fixture();
    f.start("done", Mode::Autonomous, vec![]);
    let app = f.app();
    let resp = app.clone().oneshot(Request::get("/runs/done/events").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let text = String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    let msgs = sse_messages(&text);
    assert_eq!(msgs.first().unwrap(), &(0, "run_started".to_string()));
    assert_eq!(msgs.last().unwrap().1, "run_completed");
    assert!(msgs.windows(2).all(|w| w[1].0 == w[0].0 + 1));

    let resp = app.clone().oneshot(Request::get("/runs/done/events?after=3").body(Body::empty()).unwrap()).await.unwrap();
    let text = String::from_utf8(resp.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    assert_eq!(sse_messages(&text)[0].0, 4);

    let req = Request::get("/runs/done/events").header("last-event-id", "10").body(Body::empty()).unwrap();
    let text = String::from_utf8(app.oneshot(req).await.unwrap().into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    assert_eq!(sse_messages(&text)[0].0, 11);
}

#[tokio::test]
async fn event_stream_follows_a_live_gate() {
    let f = fixture();
    f.start("live", Mode::Copilot, vec![]);
    let app = f.app();
    let resp = app.clone().oneshot(Request::get("/runs/live/events").body(Body::empty()).unwrap()).await.unwrap();
    let mut body = resp.into_body();

    // drive the run in the background; it blocks on the decision mailbox
    let store = f.store.clone();
    std::thread::spawn(move || {
        let mut mailbox = Mailbox::new(None);
        mailbox.poll = Duration::from_millis(5);
        resume(&store, "live", &mut mailbox, &mut |_| {}).ok();
    });
    let (s, _) = call(&app, "POST", "/runs/live/decisions", Some(json!({"phase": "literature_review", "decision": "proceed"}))).await;
    assert_eq!(s, StatusCode::CREATED);

    // read until the plan checkpoint opens
    let mut seen = String::new();
    let deadline = tokio::time::Instant::now() + Duration::from_secs(30);
    while !sse_messages(&seen).iter().any(|m| m.1 == "gate_opened" && m.0 > 3) {
        let frame = tokio::time::timeout_at(deadline, body.frame()).await.expect("stream stalled").unwrap().unwrap();
        if let Ok(data) = frame.into_data() {
            seen.push_str(std::str::from_utf8(&data).unwrap());
        }
    }
    let kinds: Vec<String> = sse_messages(&seen).into_iter().map(|m| m.1).collect();
    assert_eq!(
        kinds,
        [
            "run_started", "phase_started", "phase_completed", "gate_opened",
            "run_resumed", "decision_applied", "phase_started", "phase_completed", "gate_opened",
        ]
    );
    assert!(seen.contains(r#""phase":"plan_formulation""#));
    assert_eq!(f.store.open("live").unwrap().load_state().unwrap().status, RunStatus::AwaitingDecision);
}

#[tokio::test]
async fn bearer_token_guards_every_route() {
    let f = fixture();
    f.start("done", Mode::Autonomous, vec![]);
    let app = router(ApiState::new(f.store.clone()).with_token(Some("s3cret".into())));
    assert_eq!(call(&app, "GET", "/runs", None).await.0, StatusCode::UNAUTHORIZED);

    let req = Request::get("/runs").header("authorization", "Bearer s3cret").body(Body::empty()).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::OK);
    let req = Request::get("/runs").header("authorization", "Bearer wrong").body(Body::empty()).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::UNAUTHORIZED);

    // browsers cannot set headers on an event source
    assert_eq!(call(&app, "GET", "/runs/done/events?token=s3cret", None).await.0, StatusCode::OK);
    assert_eq!(call(&app, "GET", "/runs/done?token=s3cret", None).await.0, StatusCode::UNAUTHORIZED);
}
