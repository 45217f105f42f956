//! HTTP/JSON service: conversation sessions, trace browsing and bench runs.
//!
//! The store is read-only while serving. Messages to one session are handled
//! one at a time; different sessions proceed concurrently.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use setscope_bench::{generate_suite, run_bench, BenchConfig, BenchQuestion, DEFAULT_SEED};
use setscope_core::stats::{self, StatsError, DEFAULT_MIN_SET_ACCESSES};
use setscope_core::{Pc, TraceStore};
use setscope_rag::generator::{ClientError, ConversationMemory, ModelClient, Shots};
use setscope_rag::pipeline::{Pipeline, PipelineConfig, PipelineError, RetrieverChoice};
use setscope_rag::ranger::RangerError;

use crate::commands::pc_stats_json;

/// Longest transcript excerpt returned with a 502.
pub const TRANSCRIPT_SNIPPET_CHARS: usize = 2000;
pub const DEFAULT_HOT_SETS: usize = 5;

struct Session {
    config: PipelineConfig,
    memory: Mutex<ConversationMemory>,
    turns: Mutex<usize>,
    last_used: Mutex<Instant>,
}

#[derive(Clone)]
enum RunStatus {
    Running,
    Done(Value),
    Failed(String),
}

pub struct AppState {
    store: Arc<TraceStore>,
    client: Arc<dyn ModelClient>,
    defaults: PipelineConfig,
    ttl: Duration,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    runs: Mutex<HashMap<String, RunStatus>>,
}

impl AppState {
    pub fn new(store: TraceStore, client: Arc<dyn ModelClient>, defaults: PipelineConfig, ttl: Duration) -> Arc<Self> {
        Arc::new(AppState {
            store: Arc::new(store),
            client,
            defaults,
            ttl,
            sessions: Mutex::new(HashMap::new()),
            runs: Mutex::new(HashMap::new()),
        })
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn expire_idle(&self) -> usize {
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.last_used.lock().unwrap().elapsed() <= self.ttl);
        before - sessions.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.expire_idle();
        let s = self.sessions.lock().unwrap().get(id).cloned();
        let s = s.ok_or_else(|| ApiError::not_found("SessionNotFound", format!("session {id} not found")))?;
        *s.last_used.lock().unwrap() = Instant::now();
        Ok(s)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    transcript: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into(), transcript: None }
    }
    fn not_found(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, kind, message)
    }
    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "SchemaViolation", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": { "kind": self.kind, "message": self.message } });
        if let Some(t) = self.transcript {
            body["error"]["transcript"] = Value::String(t);
        }
        (self.status, Json(body)).into_response()
    }
}

fn snippet(s: &str) -> String {
    match s.char_indices().nth(TRANSCRIPT_SNIPPET_CHARS) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

impl From<StatsError> for ApiError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::PcNotFound(_) => ApiError::not_found("PcNotFound", e.to_string()),
            StatsError::WorkloadNotFound(_) => ApiError::not_found("WorkloadNotFound", e.to_string()),
            StatsError::NotEnoughSets { .. } => ApiError::bad_request(e.to_string()),
            StatsError::NoMisses => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "NoMisses", e.to_string()),
        }
    }
}

fn client_error(e: &ClientError) -> ApiError {
    let mut err = ApiError::new(StatusCode::BAD_GATEWAY, "ModelClientFailure", e.to_string());
    err.transcript = Some(snippet(&match e {
        ClientError::Status { body, .. } => body.clone(),
        other => other.to_string(),
    }));
    err
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match &e {
            PipelineError::Client(c) => client_error(c),
            PipelineError::Ranger(RangerError::ExhaustedRetries { transcript }) => {
                let text: Vec<String> = transcript
                    .iter()
                    .enumerate()
                    .map(|(i, a)| format!("attempt {}: {}\n=> {}", i + 1, a.generated.trim(), a.error))
                    .collect();
                let mut err = ApiError::new(StatusCode::BAD_GATEWAY, "ModelClientFailure", e.to_string());
                err.transcript = Some(snippet(&text.join("\n")));
                err
            }
            PipelineError::Ranger(r) => ApiError::new(StatusCode::BAD_GATEWAY, "ModelClientFailure", r.to_string()),
        }
    }
}

/// JSON body whose decoding failures are reported as 400 with our error body.
/// An empty body decodes as `null`, so optional payloads may be omitted.
fn decode<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let slice: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"null" } else { body };
    serde_json::from_slice(slice).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRequest {
    retriever: Option<RetrieverChoice>,
    shots: Option<Shots>,
    max_retries: Option<usize>,
}

impl SessionRequest {
    fn apply(&self, base: PipelineConfig) -> PipelineConfig {
        PipelineConfig {
            retriever: self.retriever.unwrap_or(base.retriever),
            shots: self.shots.unwrap_or(base.shots),
            max_retries: self.max_retries.unwrap_or(base.max_retries),
            ..base
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageRequest {
    text: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchRequest {
    retriever: Option<RetrieverChoice>,
    shots: Option<Shots>,
    max_retries: Option<usize>,
    questions: Option<Vec<BenchQuestion>>,
}

type Shared = State<Arc<AppState>>;

async fn create_session(State(app): Shared, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: Option<SessionRequest> = decode(&body)?;
    let config = req.unwrap_or_default().apply(app.defaults);
    let id = uuid::Uuid::new_v4().to_string();
    let session = Session {
        config,
        memory: Mutex::new(ConversationMemory::default()),
        turns: Mutex::new(0),
        last_used: Mutex::new(Instant::now()),
    };
    app.expire_idle();
    app.sessions.lock().unwrap().insert(id.clone(), Arc::new(session));
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "config": config }))))
}

async fn get_session(State(app): Shared, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = app.session(&id)?;
    let turns = *s.turns.lock().unwrap();
    Ok(Json(json!({ "id": id, "config": s.config, "turns": turns })))
}

async fn delete_session(State(app): Shared, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    app.session(&id)?;
    app.sessions.lock().unwrap().remove(&id);
    Ok(StatusCode::NO_CONTENT)
}

async fn post_message(State(app): Shared, Path(id): Path<String>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: MessageRequest = decode(&body)?;
    if req.text.trim().is_empty() {
        return Err(ApiError::bad_request("message text is empty"));
    }
    let session = app.session(&id)?;
    let app2 = app.clone();
    let s2 = session.clone();
    let result = tokio::task::spawn_blocking(move || {
        // held for the whole turn: one message at a time per session
        let mut memory = s2.memory.lock().unwrap();
        let pipeline = Pipeline::new(&app2.store, app2.client.as_ref(), s2.config);
        let r = pipeline.ask(&req.text, &mut memory);
        if r.is_ok() {
            *s2.turns.lock().unwrap() += 1;
        }
        r
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?;
    *session.last_used.lock().unwrap() = Instant::now();
    let a = result?;
    Ok(Json(serde_json::to_value(a).expect("answers serialize")))
}

async fn list_traces(State(app): Shared) -> Json<Value> {
    let traces: Vec<Value> = app
        .store
        .bundles()
        .map(|b| {
            json!({
                "key": b.key.canonical_id(),
                "workload": b.key.workload(),
                "policy": b.key.policy(),
                "accesses": b.records.len(),
                "metadata": b.metadata,
            })
        })
        .collect();
    Json(json!({ "traces": traces }))
}

fn bundle<'a>(app: &'a AppState, key: &str) -> Result<&'a setscope_core::TraceBundle, ApiError> {
    app.store.get_by_id(key).ok_or_else(|| ApiError::not_found("TraceNotFound", format!("trace {key} not found")))
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    pc: Option<String>,
}

async fn trace_stats(
    State(app): Shared,
    Path(key): Path<String>,
    Query(q): Query<StatsQuery>,
) -> Result<Json<Value>, ApiError> {
    let b = bundle(&app, &key)?;
    match q.pc {
        Some(pc) => {
            let pc: Pc = pc.parse().map_err(|e| ApiError::bad_request(format!("pc: {e}")))?;
            Ok(Json(pc_stats_json(&stats::pc_stats(&b.records, pc)?)))
        }
        None => Ok(Json(json!({
            "key": key,
            "metadata": b.metadata,
            "top_miss_pc": stats::top_miss_pc(&b.records).ok(),
            "pcs": stats::all_pc_stats(&b.records).iter().map(pc_stats_json).collect::<Vec<_>>(),
        }))),
    }
}

#[derive(Debug, Deserialize)]
struct SetsQuery {
    k: Option<String>,
    min_accesses: Option<String>,
}

fn parse_num<T: std::str::FromStr>(name: &str, v: Option<String>, default: T) -> Result<T, ApiError> {
    match v {
        None => Ok(default),
        Some(s) => s.parse().map_err(|_| ApiError::bad_request(format!("{name}: `{s}` is not a non-negative integer"))),
    }
}

async fn trace_sets(
    State(app): Shared,
    Path(key): Path<String>,
    Query(q): Query<SetsQuery>,
) -> Result<Json<Value>, ApiError> {
    let b = bundle(&app, &key)?;
    let k = parse_num("k", q.k, DEFAULT_HOT_SETS)?;
    let min = parse_num("min_accesses", q.min_accesses, DEFAULT_MIN_SET_ACCESSES)?;
    let h = stats::set_hotness(&b.records, k, min)?;
    Ok(Json(serde_json::to_value(h).expect("hotness serializes")))
}

async fn start_bench(State(app): Shared, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: Option<BenchRequest> = decode(&body)?;
    let req = req.unwrap_or_default();
    let questions = match req.questions {
        Some(qs) => {
            for q in &qs {
                q.validate().map_err(|e| ApiError::bad_request(format!("question {}: {e}", q.id)))?;
            }
            qs
        }
        None => generate_suite(&app.store, DEFAULT_SEED),
    };
    let pipeline = SessionRequest { retriever: req.retriever, shots: req.shots, max_retries: req.max_retries }
        .apply(app.defaults);
    let id = uuid::Uuid::new_v4().to_string();
    app.runs.lock().unwrap().insert(id.clone(), RunStatus::Running);
    let (app2, id2) = (app.clone(), id.clone());
    tokio::task::spawn_blocking(move || {
        let config = BenchConfig { pipeline, ..BenchConfig::default() };
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            run_bench(&app2.store, app2.client.as_ref(), None, &questions, &config).to_json()
        }));
        let status = match outcome {
            Ok(v) => RunStatus::Done(v),
            Err(_) => RunStatus::Failed("bench run panicked".into()),
        };
        app2.runs.lock().unwrap().insert(id2, status);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "id": id, "status": "running" }))))
}

async fn get_bench(State(app): Shared, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let status = app.runs.lock().unwrap().get(&id).cloned();
    match status {
        None => Err(ApiError::not_found("BenchRunNotFound", format!("bench run {id} not found"))),
        Some(RunStatus::Running) => Ok(Json(json!({ "id": id, "status": "running" }))),
        Some(RunStatus::Done(report)) => Ok(Json(json!({ "id": id, "status": "done", "report": report }))),
        Some(RunStatus::Failed(e)) => Ok(Json(json!({ "id": id, "status": "failed", "error": e }))),
    }
}

async fn health(State(app): Shared) -> Json<Value> {
    Json(json!({ "status": "ok", "traces": app.store.len() }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/traces", get(list_traces))
        .route("/traces/{key}/stats", get(trace_stats))
        .route("/traces/{key}/sets", get(trace_sets))
        .route("/bench/runs", post(start_bench))
        .route("/bench/runs/{id}", get(get_bench))
        .with_state(state)
}

/// Serves until interrupted. Idle sessions are swept periodically.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let sweeper = state.clone();
    let period = (state.ttl / 4).max(Duration::from_secs(1));
    tokio::spawn(async move {
        loop {
            tokio::time::sleep(period).await;
            let n = sweeper.expire_idle();
            if n > 0 {
                log::info!("expired {n} idle session(s)");
            }
        }
    });
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
