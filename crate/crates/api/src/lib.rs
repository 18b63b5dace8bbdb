//! HTTP control API over a directory of runs.
//!
//! Everything is read from the run directories, so the server needs no
//! shared memory with the pipeline driver and any number of readers can
//! follow a run. Decisions go through [`submit_decision`], which makes the
//! first writer win and repeats of the same decision id idempotent.
//!
//! Routes:
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/runs` | run summaries |
//! | GET | `/runs/{id}` | full run state |
//! | GET | `/runs/{id}/phases/{phase}/output` | a phase output |
//! | GET | `/runs/{id}/transcripts/{phase}` | prompts and responses of a phase |
//! | GET | `/runs/{id}/telemetry` | per-phase rows plus totals |
//! | GET | `/runs/{id}/events` | server-sent event stream |
//! | POST | `/runs/{id}/decisions` | checkpoint decision |

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;

use agentlab::orchestrator::events::{read_events, Event};
use agentlab::orchestrator::gate::{submit_decision, DecisionBody, GateError};
use agentlab::orchestrator::state::RunStatus;
use agentlab::orchestrator::store::{RunDir, RunStore, StoreError};
use agentlab::orchestrator::telemetry::totals;
use agentlab::phase::PhaseId;

/// How often the event stream looks for new lines.
const DEFAULT_POLL: Duration = Duration::from_millis(100);

#[derive(Clone)]
pub struct ApiState {
    inner: Arc<Inner>,
}

struct Inner {
    store: RunStore,
    token: Option<String>,
    poll: Duration,
}

impl ApiState {
    pub fn new(store: RunStore) -> Self {
        Self { inner: Arc::new(Inner { store, token: None, poll: DEFAULT_POLL }) }
    }

    /// Requires `Authorization: Bearer <token>` (or `?token=` on the event
    /// stream, which browsers cannot send headers for).
    pub fn with_token(self, token: Option<String>) -> Self {
        let inner = Inner { store: self.inner.store.clone(), token, poll: self.inner.poll };
        Self { inner: Arc::new(inner) }
    }

    pub fn with_poll_interval(self, poll: Duration) -> Self {
        let inner = Inner { store: self.inner.store.clone(), token: self.inner.token.clone(), poll };
        Self { inner: Arc::new(inner) }
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Conflict(String),
    Unauthorized,
    Internal(String),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => ApiError::NotFound(e.to_string()),
            StoreError::InvalidRunId(_) => ApiError::BadRequest(e.to_string()),
            StoreError::AlreadyExists(_) => ApiError::Conflict(e.to_string()),
            StoreError::CorruptState { .. } | StoreError::Io(_) => ApiError::Internal(e.to_string()),
        }
    }
}

impl From<GateError> for ApiError {
    fn from(e: GateError) -> Self {
        match e {
            GateError::Conflict(m) => ApiError::Conflict(m),
            GateError::Invalid(m) => ApiError::BadRequest(m),
            GateError::Store(s) => s.into(),
            GateError::Interrupted(m) => ApiError::Internal(m),
            GateError::Io(e) => ApiError::Internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "missing or wrong bearer token".to_string()),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({"error": message}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/runs", get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/phases/{phase}/output", get(get_output))
        .route("/runs/{id}/transcripts/{phase}", get(get_transcript))
        .route("/runs/{id}/telemetry", get(get_telemetry))
        .route("/runs/{id}/events", get(events))
        .route("/runs/{id}/decisions", post(post_decision))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

/// Serves the API until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: ApiState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn auth(State(state): State<ApiState>, req: Request, next: Next) -> Response {
    let Some(expected) = &state.inner.token else { return next.run(req).await };
    let header_ok = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == expected);
    let query_ok = req.uri().path().ends_with("/events")
        && req
            .uri()
            .query()
            .unwrap_or("")
            .split('&')
            .any(|kv| kv.strip_prefix("token=").is_some_and(|t| t == expected));
    if header_ok || query_ok {
        next.run(req).await
    } else {
        ApiError::Unauthorized.into_response()
    }
}

fn open(state: &ApiState, id: &str) -> ApiResult<RunDir> {
    Ok(state.inner.store.open(id)?)
}

fn parse_phase(s: &str) -> ApiResult<PhaseId> {
    s.parse().map_err(|e: agentlab::phase::UnknownPhase| ApiError::BadRequest(e.to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub topic: String,
    pub status: RunStatus,
    pub phase: PhaseId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_gate: Option<String>,
}

async fn list_runs(State(state): State<ApiState>) -> ApiResult<Json<Vec<RunSummary>>> {
    let store = &state.inner.store;
    let mut out = Vec::new();
    for id in store.list()? {
        // a run being created or a damaged one is left out of the listing
        let Ok(s) = store.open(&id).and_then(|d| d.load_state()) else { continue };
        out.push(RunSummary {
            run_id: s.run_id,
            topic: s.task.topic().to_string(),
            status: s.status,
            phase: s.phase,
            pending_gate: s.pending.map(|p| p.gate_id),
        });
    }
    Ok(Json(out))
}

async fn get_run(State(state): State<ApiState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = open(&state, &id)?.load_state()?;
    Ok(Json(s).into_response())
}

async fn get_output(State(state): State<ApiState>, Path((id, phase)): Path<(String, String)>) -> ApiResult<Response> {
    let phase = parse_phase(&phase)?;
    let s = open(&state, &id)?.load_state()?;
    match s.output(phase) {
        Some(o) => Ok(Json(json!({"phase": phase, "attempt": s.attempt(phase), "output": o, "rendered": o.render()})).into_response()),
        None => Err(ApiError::NotFound(format!("run {id} has no {} output yet", phase.slug()))),
    }
}

async fn get_transcript(State(state): State<ApiState>, Path((id, phase)): Path<(String, String)>) -> ApiResult<Response> {
    let phase = parse_phase(&phase)?;
    let records = open(&state, &id)?.transcript(phase)?;
    Ok(Json(records).into_response())
}

async fn get_telemetry(State(state): State<ApiState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = open(&state, &id)?.load_state()?;
    Ok(Json(json!({"rows": s.telemetry, "totals": totals(&s.telemetry)})).into_response())
}

async fn post_decision(
    State(state): State<ApiState>,
    Path(id): Path<String>,
    body: Result<Json<DecisionBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let dir = open(&state, &id)?;
    let submitted = tokio::task::spawn_blocking(move || submit_decision(&dir, &body, "api"))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let status = if submitted.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(submitted)).into_response())
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    /// Only events with a larger sequence number are sent.
    after: Option<u64>,
}

struct Tail {
    dir: RunDir,
    after: Option<u64>,
    queued: VecDeque<Event>,
    poll: Duration,
    finished: bool,
}

impl Tail {
    fn fresh(&self) -> std::io::Result<Vec<Event>> {
        let after = self.after;
        Ok(read_events(&self.dir.events_path())?.into_iter().filter(|e| after.is_none_or(|a| e.seq > a)).collect())
    }
}

fn to_sse(e: &Event) -> SseEvent {
    let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    SseEvent::default().id(e.seq.to_string()).event(kind).data(serde_json::to_string(e).unwrap_or_default())
}

/// Streams the run's events, starting after `?after=` or the
/// `Last-Event-ID` header. The stream ends once a finished run has no more
/// events to send.
async fn events(
    State(state): State<ApiState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, std::convert::Infallible>>>> {
    let dir = open(&state, &id)?;
    let last_id = headers.get("last-event-id").and_then(|v| v.to_str().ok()).and_then(|v| v.trim().parse().ok());
    let tail = Tail { dir, after: q.after.or(last_id), queued: VecDeque::new(), poll: state.inner.poll, finished: false };
    let stream = futures::stream::unfold(tail, |mut t| async move {
        loop {
            if let Some(e) = t.queued.pop_front() {
                t.after = Some(e.seq);
                return Some((Ok(to_sse(&e)), t));
            }
            if t.finished {
                return None;
            }
            // read the status before the log so no final event is missed
            let terminal = t.dir.load_state().map(|s| s.status.is_terminal()).unwrap_or(false);
            match t.fresh() {
                Ok(new) if !new.is_empty() => t.queued.extend(new),
                Ok(_) if terminal => return None,
                Ok(_) => tokio::time::sleep(t.poll).await,
                Err(e) => {
                    log::warn!("event stream for {}: {e}", t.dir.run_id());
                    t.finished = true;
                }
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
