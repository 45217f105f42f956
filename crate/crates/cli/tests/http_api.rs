use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use setscope_cli::server::{router, AppState};
use setscope_core::fixtures;
use setscope_rag::generator::{ChatMessage, ClientError, GroundedEchoClient, ModelClient, ScriptedClient};
use setscope_rag::pipeline::PipelineConfig;
use tower::ServiceExt;

/// Echo client that records every prompt it is shown.
#[derive(Default)]
struct Recorder {
    prompts: Mutex<Vec<String>>,
}

impl ModelClient for Recorder {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let text = messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        self.prompts.lock().unwrap().push(text);
        GroundedEchoClient.chat(messages)
    }
    fn name(&self) -> String {
        "recorder".into()
    }
}

fn app_with(client: Arc<dyn ModelClient>, ttl: Duration) -> (Router, Arc<AppState>) {
    let state = AppState::new(fixtures::store().unwrap(), client, PipelineConfig::default(), ttl);
    (router(state.clone()), state)
}

fn app() -> Router {
    app_with(Arc::new(GroundedEchoClient), Duration::from_secs(600)).0
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    raw(app, req).await
}

async fn raw(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn session(app: &Router, config: Value) -> String {
    let (s, v) = call(app, Method::POST, "/sessions", Some(config)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

async fn say(app: &Router, id: &str, text: &str) -> (StatusCode, Value) {
    call(app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({ "text": text }))).await
}

#[tokio::test]
async fn lists_traces() {
    let (s, v) = call(&app(), Method::GET, "/traces", None).await;
    assert_eq!(s, StatusCode::OK);
    let keys: Vec<&str> = v["traces"].as_array().unwrap().iter().map(|t| t["key"].as_str().unwrap()).collect();
    assert_eq!(keys.len(), 12);
    assert!(keys.contains(&"graph_evictions_lru"));
}

#[tokio::test]
async fn non_session_responses_are_reproducible() {
    for uri in ["/traces", "/traces/matrix_evictions_lru/stats", "/traces/stream_evictions_belady/sets?k=3"] {
        let a = call(&app(), Method::GET, uri, None).await;
        let b = call(&app(), Method::GET, uri, None).await;
        assert_eq!(a, b, "{uri}");
    }
}

#[tokio::test]
async fn pc_stats_and_their_errors() {
    let app = app();
    let (s, v) = call(&app, Method::GET, "/traces/graph_evictions_lru/stats?pc=0x405832", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["pc"], "0x405832");
    let (acc, hits) = (v["accesses"].as_f64().unwrap(), v["hits"].as_f64().unwrap());
    assert!((v["hit_rate"].as_f64().unwrap() - 100.0 * hits / acc).abs() < 1e-9);

    let (s, v) = call(&app, Method::GET, "/traces/graph_evictions_lru/stats?pc=0x4037aa", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "PcNotFound");

    let (s, _) = call(&app, Method::GET, "/traces/graph_evictions_lru/stats?pc=zz", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call(&app, Method::GET, "/traces/graph_evictions_mru/stats?pc=0x405832", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "TraceNotFound");
}

#[tokio::test]
async fn workload_stats_top_row_is_top_miss_pc() {
    let (_, v) = call(&app(), Method::GET, "/traces/stream_evictions_lru/stats", None).await;
    let mut pcs = v["pcs"].as_array().unwrap().clone();
    pcs.sort_by(|a, b| b["misses"].as_u64().cmp(&a["misses"].as_u64()));
    assert_eq!(pcs[0]["pc"], v["top_miss_pc"]["pc"]);
}

#[tokio::test]
async fn set_hotness() {
    let app = app();
    let (s, v) = call(&app, Method::GET, "/traces/graph_evictions_lru/sets?k=5", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["hot"].as_array().unwrap().len(), 5);
    assert_eq!(v["cold"].as_array().unwrap().len(), 5);
    let (s, _) = call(&app, Method::GET, "/traces/graph_evictions_lru/sets?k=many", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, Method::GET, "/traces/graph_evictions_lru/sets?k=500", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn ranger_session_echoes_the_program() {
    let app = app();
    let id = session(&app, json!({ "retriever": "ranger" })).await;
    let (s, v) = say(&app, &id, "List all unique PCs in the trace graph under lru.").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["retriever_used"], "ranger");
    assert_eq!(v["attempts"], 1);
    let program = v["program"].as_str().unwrap();
    assert!(program.starts_with("from graph/lru"), "{program}");
    assert_eq!(v["provenance"]["program"], program);
    assert!(v["evidence"].as_str().unwrap().contains(program));
    for pc in ["0x405832", "0x409228", "0x409270"] {
        assert!(v["answer"].as_str().unwrap().contains(pc), "{v}");
    }
}

#[tokio::test]
async fn sieve_answer_carries_key_and_filters() {
    let app = app();
    let store = fixtures::store().unwrap();
    let recs = &store.get_pair("stream", "random").unwrap().records;
    // a tuple with a single outcome, so the expected label is unambiguous
    let r = recs[777..]
        .iter()
        .find(|r| {
            recs.iter()
                .filter(|o| o.program_counter == r.program_counter && o.memory_address == r.memory_address)
                .all(|o| o.evict == r.evict)
        })
        .unwrap();
    let id = session(&app, json!({ "retriever": "sieve" })).await;
    let q = format!(
        "Does the memory access with PC {} and address {} result in a cache hit or cache miss for the stream workload and random replacement policy?",
        r.program_counter, r.memory_address
    );
    let (s, v) = say(&app, &id, &q).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["provenance"]["keys"], json!(["stream_evictions_random"]));
    assert_eq!(v["provenance"]["filters"]["addresses"], json!([r.memory_address.to_string()]));
    assert_eq!(v["answer"], r.evict.to_string());
}

#[tokio::test]
async fn interleaved_sessions_do_not_share_memory() {
    let rec = Arc::new(Recorder::default());
    let (app, _) = app_with(rec.clone(), Duration::from_secs(600));
    let s1 = session(&app, json!({ "retriever": "sieve" })).await;
    let s2 = session(&app, json!({ "retriever": "sieve" })).await;
    assert_ne!(s1, s2);
    say(&app, &s1, "What is the miss rate for PC 0x405832 in graph with lru?").await;
    say(&app, &s2, "What is the miss rate for PC 0x401e31 in matrix with lru?").await;
    say(&app, &s1, "Remind me which PC we discussed first.").await;
    say(&app, &s2, "Which PC did I ask about earlier?").await;
    let prompts = rec.prompts.lock().unwrap().clone();
    let find = |needle: &str| prompts.iter().rev().find(|p| p.contains(needle)).unwrap().clone();
    let p1 = find("Remind me which PC");
    let p2 = find("Which PC did I ask about earlier");
    assert!(p1.contains("0x405832") && !p1.contains("0x401e31"), "{p1}");
    assert!(p2.contains("0x401e31") && !p2.contains("0x405832"), "{p2}");
    let (_, v) = call(&app, Method::GET, &format!("/sessions/{s1}"), None).await;
    assert_eq!(v["turns"], 2);
}

#[tokio::test]
async fn concurrent_messages_to_one_session_are_serialized() {
    let app = app();
    let id = session(&app, json!({})).await;
    let handles: Vec<_> = (0..6)
        .map(|i| {
            let (app, id) = (app.clone(), id.clone());
            tokio::spawn(async move {
                say(&app, &id, &format!("How many times did PC 0x405832 appear in graph under lru? ({i})")).await
            })
        })
        .collect();
    for h in handles {
        let (s, v) = h.await.unwrap();
        assert_eq!(s, StatusCode::OK, "{v}");
    }
    let (_, v) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(v["turns"], 6);
}

#[tokio::test]
async fn unknown_sessions_and_bad_bodies() {
    let app = app();
    let (s, v) = say(&app, "no-such-session", "hi").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "SessionNotFound");
    let id = session(&app, json!({})).await;
    let (s, _) = call(&app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({ "txt": "hi" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = say(&app, &id, "   ").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let req = Request::builder().method(Method::POST).uri("/sessions").body(Body::from("{not json")).unwrap();
    assert_eq!(raw(&app, req).await.0, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, Method::POST, "/sessions", Some(json!({ "retriever": "oracle" }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (s, _) = say(&app, &id, "hi").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let (app, state) = app_with(Arc::new(GroundedEchoClient), Duration::from_millis(100));
    let id = session(&app, json!({})).await;
    assert_eq!(state.session_count(), 1);
    tokio::time::sleep(Duration::from_millis(250)).await;
    let (s, _) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test]
async fn model_failures_are_502_with_transcript() {
    let client = ScriptedClient::new(Vec::<String>::new());
    client.push(Err(ClientError::Status { status: 503, body: "upstream overloaded".into() }));
    let (app, _) = app_with(Arc::new(client), Duration::from_secs(600));
    let id = session(&app, json!({ "retriever": "ranger" })).await;
    let (s, v) = say(&app, &id, "List all unique PCs.").await;
    assert_eq!(s, StatusCode::BAD_GATEWAY);
    assert_eq!(v["error"]["kind"], "ModelClientFailure");
    assert_eq!(v["error"]["transcript"], "upstream overloaded");

    // a model that never writes a valid program exhausts its retries
    let bad = ScriptedClient::new(vec!["result = df['pc'].unique()"; 4]);
    let (app, _) = app_with(Arc::new(bad), Duration::from_secs(600));
    let id = session(&app, json!({ "retriever": "ranger", "max_retries": 3 })).await;
    let (s, v) = say(&app, &id, "List all unique PCs.").await;
    assert_eq!(s, StatusCode::BAD_GATEWAY, "{v}");
    let t = v["error"]["transcript"].as_str().unwrap();
    assert!(t.contains("attempt 1:") && t.contains("attempt 4:"), "{t}");
    let (_, v) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(v["turns"], 0);
}

#[tokio::test]
async fn bench_runs() {
    let app = app();
    let (s, v) = call(&app, Method::POST, "/bench/runs", None).await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let id = v["id"].as_str().unwrap().to_string();
    let report = loop {
        let (s, v) = call(&app, Method::GET, &format!("/bench/runs/{id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        match v["status"].as_str().unwrap() {
            "running" => tokio::time::sleep(Duration::from_millis(50)).await,
            "done" => break v["report"].clone(),
            other => panic!("{other}: {v}"),
        }
    };
    let cats = report["categories"].as_array().unwrap();
    assert_eq!(cats.len(), 11);
    for c in cats.iter().filter(|c| ["HitMiss", "MissRate", "Count"].contains(&c["category"].as_str().unwrap())) {
        assert_eq!(c["accuracy_pct"], 100.0, "{c}");
    }

    let (s, _) = call(&app, Method::GET, "/bench/runs/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let bad = json!({ "questions": [{ "id": "x", "tier": "TG", "category": "SemanticAnalysis", "text": "q",
        "expected": { "kind": "label", "allowed": ["a"], "alternatives": ["a"] } }] });
    let (s, v) = call(&app, Method::POST, "/bench/runs", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
}
