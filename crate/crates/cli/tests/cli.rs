use std::path::Path;
use std::process::Command;

use setscope_cli::commands::{self, BenchArgs, SimulateArgs, StatsArgs, FIXTURE_STORE};
use setscope_cli::error::{CliError, EXIT_NOT_FOUND, EXIT_USAGE};
use setscope_core::{persist, Pc};
use setscope_rag::generator::GroundedEchoClient;
use setscope_rag::pipeline::{PipelineConfig, RetrieverChoice};

const BIN: &str = env!("CARGO_BIN_EXE_setscope");

/// A B A C B A, one PC, 64-byte lines.
fn write_t1(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("t1.trace");
    let lines: String = [0, 1, 0, 2, 1, 0].iter().map(|k| format!("0x400000 {:#x}\n", 0x1000 + k * 64)).collect();
    std::fs::write(&p, lines).unwrap();
    p
}

fn t1_args(dir: &Path, policy: &str) -> SimulateArgs {
    SimulateArgs {
        trace: write_t1(dir),
        workload: None,
        sets: 1,
        ways: 2,
        line_size: 64,
        history_depth: None,
        policy: policy.into(),
        symbols: None,
        out: dir.join("store"),
    }
}

#[test]
fn simulate_t1_lru_has_one_hit() {
    let dir = tempfile::tempdir().unwrap();
    let v = commands::simulate(&t1_args(dir.path(), "lru")).unwrap();
    assert_eq!(v["key"], "t1_evictions_lru");
    assert_eq!(v["hits"], 1);
    assert_eq!(v["misses"], 5);
    let b = persist::load_bundle(&dir.path().join("store/t1_evictions_lru")).unwrap();
    assert_eq!(b.records.iter().filter(|r| r.is_miss() == 0).count(), 1);
    assert!(b.records[2].is_miss() == 0, "third access (A again) hits");
}

#[test]
fn simulate_t1_belady_evicts_farthest() {
    // at C, A's next use (index 5) is farther than B's (index 4): A goes, B hits
    let dir = tempfile::tempdir().unwrap();
    let v = commands::simulate(&t1_args(dir.path(), "belady")).unwrap();
    assert_eq!(v["hits"], 2);
}

#[test]
fn policy_strings_parse() {
    assert!(commands::parse_policy("random:9").is_ok());
    assert!(commands::parse_policy("bypass_lru:0x401e31,0x4037aa").is_ok());
    for bad in ["bypass_lru:", "random:x", "mru", "lru:3"] {
        assert!(matches!(commands::parse_policy(bad), Err(CliError::Usage(_))), "{bad}");
    }
}

#[test]
fn ingest_round_trips_and_stats_report_pcs() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = t1_args(dir.path(), "lru");
    a.out = dir.path().join("staging");
    commands::simulate(&a).unwrap();
    let store_dir = dir.path().join("store");
    let v = commands::ingest(&[dir.path().join("staging/t1_evictions_lru")], &store_dir).unwrap();
    assert_eq!(v["ingested"][0], "t1_evictions_lru");
    let store = commands::load_store(&store_dir).unwrap();
    let s = commands::stats(
        &store,
        &StatsArgs { key: "t1_evictions_lru".into(), pc: Some(Pc(0x400000)), sets: None, min_set_accesses: None, bypass: None },
    )
    .unwrap();
    assert_eq!(s["accesses"], 6);
    assert_eq!(s["pc"], "0x400000");
    let missing = commands::stats(
        &store,
        &StatsArgs { key: "nope_evictions_lru".into(), pc: None, sets: None, min_set_accesses: None, bypass: None },
    );
    assert!(matches!(missing, Err(CliError::NotFound(_))));
}

#[test]
fn enrich_fills_code_context() {
    let dir = tempfile::tempdir().unwrap();
    let out = commands::fixture(dir.path()).unwrap();
    assert_eq!(out["bundles"], 12);
    let store_dir = dir.path().join("store");
    let v = commands::enrich_store(&store_dir, &dir.path().join("symbols.jsonl")).unwrap();
    assert_eq!(v["bundles"], 12);
    assert_eq!(v["records_with_context"], 36000);
}

#[test]
fn query_answer_cites_trace_key() {
    let store = commands::load_store(Path::new(FIXTURE_STORE)).unwrap();
    let r = &store.get_pair("matrix", "belady").unwrap().records[321];
    let q = format!(
        "Does the memory access with PC {} and address {} result in a cache hit or cache miss for matrix under belady?",
        r.program_counter, r.memory_address
    );
    let config = PipelineConfig { retriever: RetrieverChoice::Sieve, ..Default::default() };
    let v = commands::query(&store, &GroundedEchoClient, config, &q).unwrap();
    assert_eq!(v["provenance"]["keys"][0], "matrix_evictions_belady");
    assert_eq!(v["retriever_used"], "sieve");
}

#[test]
fn chat_keeps_one_conversation() {
    let store = commands::load_store(Path::new(FIXTURE_STORE)).unwrap();
    let input = "List all unique PCs in the trace graph under lru.\n:evidence\n\n:quit\nnever read\n";
    let mut out = Vec::new();
    let config = PipelineConfig { retriever: RetrieverChoice::Ranger, ..Default::default() };
    commands::chat(&store, &GroundedEchoClient, config, input.as_bytes(), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("0x405832, 0x409228, 0x409270"), "{text}");
    assert!(text.contains("[ranger | 1 attempt(s)] from graph/lru"), "{text}");
    assert!(text.contains("=== EVIDENCE ==="), "{text}");
}

#[test]
fn bench_with_mock_is_byte_deterministic() {
    let store = commands::load_store(Path::new(FIXTURE_STORE)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str, threads: usize| {
        let args = BenchArgs {
            questions: None,
            pipeline: PipelineConfig::default(),
            judge_scores: None,
            model_judge: false,
            threads,
            out: Some(dir.path().join(out)),
        };
        commands::bench(&store, &GroundedEchoClient, &args).unwrap();
    };
    run("a", 1);
    run("b", 4);
    for f in ["report.json", "categories.csv", "results.csv", "report.txt"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn binary_simulates_and_reports_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let trace = write_t1(dir.path());
    let out = Command::new(BIN)
        .args(["simulate", "--sets", "1", "--ways", "2", "--policy", "lru", "--trace"])
        .arg(&trace)
        .arg("--out")
        .arg(dir.path().join("s"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["hits"], 1);

    let out = Command::new(BIN)
        .args(["--store"])
        .arg(dir.path().join("s"))
        .args(["stats", "t1_evictions_lru", "--pc", "0xdead"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_NOT_FOUND));
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "not_found");

    let out = Command::new(BIN).args(["simulate", "--sets", "3", "--ways", "2", "--out", "x", "--trace"]).arg(&trace).output().unwrap();
    assert!(!out.status.success());
    let out = Command::new(BIN).env_remove("SETSCOPE_STORE").args(["stats", "k"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
}

#[test]
fn store_flag_beats_environment() {
    let dir = tempfile::tempdir().unwrap();
    commands::simulate(&t1_args(dir.path(), "lru")).unwrap();
    let out = Command::new(BIN)
        .env("SETSCOPE_STORE", dir.path().join("missing"))
        .arg("--store")
        .arg(dir.path().join("store"))
        .args(["stats", "t1_evictions_lru"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = Command::new(BIN)
        .env("SETSCOPE_STORE", dir.path().join("store"))
        .args(["stats", "t1_evictions_lru"])
        .output()
        .unwrap();
    assert!(out.status.success());
}
