//! Command implementations. Each returns the text it would print so the
//! binary stays a thin shell and tests can call commands directly.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use setscope_bench::{
    generate_suite, load_questions, run_bench, to_jsonl, BenchConfig, BenchReport, Judge, ModelJudge, ScoreFileJudge,
    DEFAULT_SEED,
};
use setscope_core::ingest::{enrich, parse_trace_file, SymbolMap};
use setscope_core::simulator::{self, CacheConfig, PolicySpec};
use setscope_core::stats::{self, DEFAULT_MIN_SET_ACCESSES};
use setscope_core::{fixtures, persist, Pc, TraceKey, TraceStore};
use setscope_rag::generator::{ConversationMemory, ModelClient};
use setscope_rag::pipeline::{Pipeline, PipelineConfig};

use crate::error::CliError;

/// Store path that selects the built-in synthetic store instead of a directory.
pub const FIXTURE_STORE: &str = ":fixture";

pub fn load_store(path: &Path) -> Result<TraceStore, CliError> {
    if path.as_os_str() == FIXTURE_STORE {
        return Ok(fixtures::store()?);
    }
    if !path.is_dir() {
        return Err(CliError::NotFound(format!("store directory {} does not exist", path.display())));
    }
    Ok(persist::load(path)?)
}

/// `lru`, `belady`, `random[:seed]`, `scored_stub` or `bypass_lru:<pc>[,<pc>...]`.
pub fn parse_policy(s: &str) -> Result<PolicySpec, CliError> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(n, a)| (n, Some(a)));
    let spec = match (name, arg) {
        ("lru", None) => PolicySpec::Lru,
        ("belady", None) => PolicySpec::Belady,
        ("scored_stub", None) => PolicySpec::ScoredStub,
        ("random", None) => PolicySpec::Random { seed: 7 },
        ("random", Some(a)) => PolicySpec::Random {
            seed: a.parse().map_err(|_| CliError::Usage(format!("random seed `{a}` is not an integer")))?,
        },
        ("bypass_lru", Some(a)) => {
            let pcs = a
                .split(',')
                .map(|p| p.trim().parse::<Pc>().map_err(|e| CliError::Usage(e.to_string())))
                .collect::<Result<BTreeSet<Pc>, _>>()?;
            PolicySpec::BypassLru { bypass_pcs: pcs }
        }
        _ => {
            return Err(CliError::Usage(format!(
                "unknown policy `{s}`; expected lru, belady, random[:seed], scored_stub or bypass_lru:<pcs>"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

pub struct SimulateArgs {
    pub trace: PathBuf,
    pub workload: Option<String>,
    pub sets: u32,
    pub ways: u32,
    pub line_size: u64,
    pub history_depth: Option<usize>,
    pub policy: String,
    pub symbols: Option<PathBuf>,
    pub out: PathBuf,
}

/// Simulates one trace and writes the bundle to `<out>/<workload>_evictions_<policy>/`.
pub fn simulate(a: &SimulateArgs) -> Result<Value, CliError> {
    let trace = parse_trace_file(&a.trace).map_err(|e| CliError::Io(e.to_string()))?;
    let workload = match &a.workload {
        Some(w) => w.clone(),
        None => a
            .trace
            .file_stem()
            .and_then(|s| s.to_str())
            .map(|s| s.replace(|c: char| !c.is_ascii_alphanumeric(), ""))
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CliError::Usage("cannot derive a workload name; pass --workload".into()))?,
    };
    let mut config = CacheConfig::new(a.sets, a.ways, a.line_size)?;
    if let Some(d) = a.history_depth {
        config = config.with_history_depth(d);
    }
    let policy = parse_policy(&a.policy)?;
    let mut bundle = simulator::simulate(&workload, &trace, &config, &policy)?;
    if let Some(p) = &a.symbols {
        let (map, _) = SymbolMap::load(p).map_err(|e| CliError::Io(e.to_string()))?;
        enrich(&mut bundle.records, &map);
    }
    let dir = a.out.join(bundle.key.canonical_id());
    persist::save_bundle(&bundle, &dir)?;
    let hits = bundle.records.iter().filter(|r| r.is_miss() == 0).count();
    Ok(json!({
        "key": bundle.key.canonical_id(),
        "path": dir.display().to_string(),
        "accesses": bundle.records.len(),
        "hits": hits,
        "misses": bundle.records.len() - hits,
        "metadata": bundle.metadata,
    }))
}

/// Copies verified bundle directories into a store directory.
pub fn ingest(bundles: &[PathBuf], store: &Path) -> Result<Value, CliError> {
    let mut added = Vec::new();
    for dir in bundles {
        let b = persist::load_bundle(dir)?;
        b.verify().map_err(CliError::Bench)?;
        persist::save_bundle(&b, &store.join(b.key.canonical_id()))?;
        added.push(b.key.canonical_id());
    }
    Ok(json!({ "store": store.display().to_string(), "ingested": added }))
}

/// Fills code context from a symbol file into every bundle of a stored trace set.
pub fn enrich_store(store_dir: &Path, symbols: &Path) -> Result<Value, CliError> {
    let (map, warnings) = SymbolMap::load(symbols).map_err(|e| CliError::Io(e.to_string()))?;
    let mut store = load_store(store_dir)?;
    let keys: Vec<TraceKey> = store.keys().cloned().collect();
    let mut enriched = 0usize;
    for k in &keys {
        let mut b = store.get(k).expect("key listed by the store").clone();
        enrich(&mut b.records, &map);
        enriched += b.records.iter().filter(|r| !r.function_name.is_empty()).count();
        store.insert(b).map_err(|e| CliError::Bench(e.to_string()))?;
    }
    persist::save(&store, store_dir)?;
    Ok(json!({
        "bundles": keys.len(),
        "records_with_context": enriched,
        "symbols": map.len(),
        "warnings": warnings.iter().map(|w| format!("{w:?}")).collect::<Vec<_>>(),
    }))
}

pub struct StatsArgs {
    pub key: String,
    pub pc: Option<Pc>,
    pub sets: Option<usize>,
    pub min_set_accesses: Option<u64>,
    pub bypass: Option<usize>,
}

pub fn pc_stats_json(s: &stats::PcStats) -> Value {
    let mut v = serde_json::to_value(s).expect("stats serialize");
    v["hit_rate"] = json!(s.hit_rate());
    v
}

pub fn stats(store: &TraceStore, a: &StatsArgs) -> Result<Value, CliError> {
    let b = store.get_by_id(&a.key).ok_or_else(|| CliError::NotFound(format!("trace {} not found", a.key)))?;
    if let Some(pc) = a.pc {
        return Ok(pc_stats_json(&stats::pc_stats(&b.records, pc)?));
    }
    if let Some(k) = a.sets {
        let h = stats::set_hotness(&b.records, k, a.min_set_accesses.unwrap_or(DEFAULT_MIN_SET_ACCESSES))?;
        return Ok(serde_json::to_value(h).expect("hotness serializes"));
    }
    if let Some(n) = a.bypass {
        return Ok(serde_json::to_value(stats::bypass_candidates(&b.records, n)).expect("candidates serialize"));
    }
    let summary = b.verify().map_err(CliError::Bench)?;
    Ok(json!({
        "key": a.key,
        "summary": summary,
        "metadata": b.metadata,
        "top_miss_pc": stats::top_miss_pc(&b.records).ok(),
        "pcs": stats::all_pc_stats(&b.records).iter().map(pc_stats_json).collect::<Vec<_>>(),
    }))
}

pub fn query(
    store: &TraceStore,
    client: &dyn ModelClient,
    config: PipelineConfig,
    question: &str,
) -> Result<Value, CliError> {
    let mut memory = ConversationMemory::default();
    let a = Pipeline::new(store, client, config).ask(question, &mut memory)?;
    Ok(serde_json::to_value(a).expect("answers serialize"))
}

/// Line-oriented chat over one conversation. `:quit` or end of input stops;
/// `:evidence` prints the evidence behind the previous answer.
pub fn chat<R: BufRead, W: Write>(
    store: &TraceStore,
    client: &dyn ModelClient,
    config: PipelineConfig,
    input: R,
    mut out: W,
) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    let pipeline = Pipeline::new(store, client, config);
    let mut memory = ConversationMemory::default();
    let mut last_evidence = String::new();
    write!(out, "> ").map_err(io)?;
    out.flush().map_err(io)?;
    for line in input.lines() {
        let line = line.map_err(io)?;
        let q = line.trim();
        match q {
            "" => {}
            ":quit" | ":q" => break,
            ":evidence" => writeln!(out, "{last_evidence}").map_err(io)?,
            _ => match pipeline.ask(q, &mut memory) {
                Ok(a) => {
                    writeln!(out, "{}", a.answer).map_err(io)?;
                    let prov = match &a.program {
                        Some(p) => format!("[{} | {} attempt(s)] {p}", a.retriever_used, a.attempts),
                        None => format!("[{} | {}]", a.retriever_used, a.provenance.keys.join(", ")),
                    };
                    writeln!(out, "{prov}").map_err(io)?;
                    last_evidence = a.evidence;
                }
                Err(e) => writeln!(out, "error: {}", CliError::from(e)).map_err(io)?,
            },
        }
        write!(out, "> ").map_err(io)?;
        out.flush().map_err(io)?;
    }
    writeln!(out).map_err(io)?;
    Ok(())
}

pub struct BenchArgs {
    pub questions: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub judge_scores: Option<PathBuf>,
    /// Ask the answering client to grade reasoning answers too.
    pub model_judge: bool,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

pub fn bench(store: &TraceStore, client: &dyn ModelClient, a: &BenchArgs) -> Result<BenchReport, CliError> {
    let (questions, mut warnings) = match &a.questions {
        Some(p) => {
            let s = load_questions(p).map_err(|e| CliError::Bench(e.to_string()))?;
            (s.questions, s.warnings)
        }
        None => (generate_suite(store, DEFAULT_SEED), Vec::new()),
    };
    let file_judge = match &a.judge_scores {
        Some(p) => Some(ScoreFileJudge::load(p).map_err(|e| CliError::Bench(e.to_string()))?),
        None => None,
    };
    let model_judge = ModelJudge { client };
    let judge: Option<&dyn Judge> = match (&file_judge, a.model_judge) {
        (Some(j), _) => Some(j),
        (None, true) => Some(&model_judge),
        (None, false) => None,
    };
    let config = BenchConfig { pipeline: a.pipeline, threads: a.threads, ..BenchConfig::default() };
    let mut report = run_bench(store, client, judge, &questions, &config);
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    if let Some(dir) = &a.out {
        write_report(&report, dir)?;
    }
    Ok(report)
}

pub fn write_report(report: &BenchReport, dir: &Path) -> Result<(), CliError> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |e: std::io::Error| CliError::Io(format!("{p}: {e}"))
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let files = [
        ("report.json", serde_json::to_string_pretty(&report.to_json()).expect("report serializes") + "\n"),
        ("categories.csv", report.categories_csv()),
        ("results.csv", report.results_csv()),
        ("report.txt", report.to_text()),
    ];
    for (name, text) in files {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(io(&p))?;
    }
    Ok(())
}

/// Writes the built-in store and its generated question suite.
pub fn fixture(out: &Path) -> Result<Value, CliError> {
    let store = fixtures::store()?;
    persist::save(&store, &out.join("store"))?;
    let suite = out.join("questions.jsonl");
    let questions = generate_suite(&store, DEFAULT_SEED);
    std::fs::write(&suite, to_jsonl(&questions)).map_err(|e| CliError::Io(format!("{}: {e}", suite.display())))?;
    let symbols = out.join("symbols.jsonl");
    std::fs::write(&symbols, fixtures::symbols().to_jsonl())
        .map_err(|e| CliError::Io(format!("{}: {e}", symbols.display())))?;
    Ok(json!({
        "store": out.join("store").display().to_string(),
        "questions": suite.display().to_string(),
        "symbols": symbols.display().to_string(),
        "bundles": store.len(),
        "question_count": questions.len(),
    }))
}
