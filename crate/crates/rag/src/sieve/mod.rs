//! Filter-based retrieval: question to filters, filters to a bundle slice,
//! slice to a rendered evidence block.

mod query;
mod render;

pub use query::{best_name, parse_query, LexicalRanker, NameRanker, NAME_THRESHOLD};
pub use render::{metric_label, render_context, render_evidence, EVIDENCE_END, EVIDENCE_START, NOT_FOUND_SENTINEL};

use serde::{Deserialize, Serialize};
use setscope_core::persist::record_to_value;
use setscope_core::stats::{self, Metric, PcStats, PolicyRank, StatsError, Target};
use setscope_core::{AccessRecord, Pc, QueryFilters, TraceBundle, TraceKey, TraceStore};

use crate::intent;

pub const DEFAULT_EXCERPT_CAP: usize = 32;
/// Excerpt cap per bundle when several policies are compared at once.
pub const COMPARISON_EXCERPT_CAP: usize = 4;
/// PCs summarized when the filters name none.
const MAX_IMPLIED_PCS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SieveError {
    #[error("no trace bundle matches {}", describe_names(.workload, .policy))]
    BundleNotFound { workload: Option<String>, policy: Option<String> },
    #[error("{} trace bundles match and none is exact: {}", .candidates.len(), join_keys(.candidates))]
    AmbiguousBundle { candidates: Vec<TraceKey> },
}

fn describe_names(w: &Option<String>, p: &Option<String>) -> String {
    format!(
        "workload={} policy={}",
        w.as_deref().unwrap_or("(any)"),
        p.as_deref().unwrap_or("(any)")
    )
}

fn join_keys(keys: &[TraceKey]) -> String {
    keys.iter().map(TraceKey::canonical_id).collect::<Vec<_>>().join(", ")
}

/// Source-level context and statistics for one PC of the selected bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcContext {
    pub pc: Pc,
    pub function_name: String,
    pub assembly_code: String,
    /// `None` when the PC never executes in the bundle.
    pub stats: Option<PcStats>,
}

/// Where an excerpt came from, sufficient to re-run the slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub key: TraceKey,
    pub filters: QueryFilters,
    /// Records matching the filters before the excerpt cap.
    pub matched: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextBundle {
    pub provenance: Provenance,
    /// At most the excerpt cap; empty when the filters constrain no record field.
    pub trace_excerpt: Vec<AccessRecord>,
    pub pc_context: Vec<PcContext>,
    pub workload_description: String,
    pub policy_description: String,
    pub metadata_summary: String,
}

impl ContextBundle {
    /// JSON form with hex strings for every PC and address.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "provenance": self.provenance,
            "trace_excerpt": self.trace_excerpt.iter().map(record_to_value).collect::<Vec<_>>(),
            "pc_context": self.pc_context,
            "workload_description": self.workload_description,
            "policy_description": self.policy_description,
            "metadata_summary": self.metadata_summary,
        })
    }
}

/// A ranked comparison of every policy run on one workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub workload: String,
    pub pc: Option<Pc>,
    pub metric: Metric,
    /// Best first.
    pub ranking: Vec<PolicyRank>,
}

/// Everything Sieve hands the generator for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveEvidence {
    pub filters: QueryFilters,
    pub bundles: Vec<ContextBundle>,
    pub comparison: Option<PolicyComparison>,
}

impl SieveEvidence {
    /// True when some bundle was asked for specific records and none matched.
    pub fn excerpt_empty(&self) -> bool {
        self.filters.has_record_constraints() && self.bundles.iter().all(|b| b.provenance.matched == 0)
    }

    pub fn keys(&self) -> Vec<TraceKey> {
        self.bundles.iter().map(|b| b.provenance.key.clone()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "filters": self.filters,
            "bundles": self.bundles.iter().map(ContextBundle::to_json).collect::<Vec<_>>(),
            "comparison": self.comparison,
        })
    }
}

fn select_bundle<'a>(store: &'a TraceStore, f: &QueryFilters) -> Result<&'a TraceBundle, SieveError> {
    let not_found = || SieveError::BundleNotFound { workload: f.workload.clone(), policy: f.policy.clone() };
    if let (Some(w), Some(p)) = (&f.workload, &f.policy) {
        return store.get_pair(w, p).ok_or_else(not_found);
    }
    let candidates: Vec<&TraceBundle> = store
        .bundles()
        .filter(|b| f.workload.as_ref().is_none_or(|w| b.key.workload() == w))
        .filter(|b| f.policy.as_ref().is_none_or(|p| b.key.policy() == p))
        .collect();
    match candidates.as_slice() {
        [] => return Err(not_found()),
        [only] => return Ok(only),
        _ => {}
    }
    if f.has_record_constraints() {
        let narrowed: Vec<&&TraceBundle> =
            candidates.iter().filter(|b| b.records.iter().any(|r| f.matches(r))).collect();
        if let [only] = narrowed.as_slice() {
            return Ok(only);
        }
    }
    Err(SieveError::AmbiguousBundle { candidates: candidates.iter().map(|b| b.key.clone()).collect() })
}

fn pc_context(bundle: &TraceBundle, pc: Pc) -> PcContext {
    let first = bundle.records.iter().find(|r| r.program_counter == pc);
    PcContext {
        pc,
        function_name: first.map(|r| r.function_name.clone()).unwrap_or_default(),
        assembly_code: first.map(|r| r.assembly_code.clone()).unwrap_or_default(),
        stats: stats::pc_stats(&bundle.records, pc).ok(),
    }
}

/// Slices the bundle the filters name and attaches per-PC context,
/// descriptions and the metadata summary.
pub fn retrieve(store: &TraceStore, filters: &QueryFilters, excerpt_cap: usize) -> Result<ContextBundle, SieveError> {
    let bundle = select_bundle(store, filters)?;
    let key = bundle.key.clone();
    let mut filters = filters.clone();
    filters.workload = Some(key.workload().to_string());
    filters.policy = Some(key.policy().to_string());

    let (matched, excerpt) = if filters.has_record_constraints() {
        let rows = store.slice(&key, &filters).unwrap_or_default();
        (rows.len(), rows.into_iter().take(excerpt_cap).cloned().collect::<Vec<_>>())
    } else {
        (bundle.records.len(), Vec::new())
    };

    let mut pcs: Vec<Pc> = filters.pcs.clone();
    for &v in &filters.either {
        if bundle.records.iter().any(|r| r.program_counter.0 == v) && !pcs.contains(&Pc(v)) {
            pcs.push(Pc(v));
        }
    }
    if pcs.is_empty() {
        for r in &excerpt {
            if pcs.len() < MAX_IMPLIED_PCS && !pcs.contains(&r.program_counter) {
                pcs.push(r.program_counter);
            }
        }
    }

    Ok(ContextBundle {
        provenance: Provenance {
            truncated: filters.has_record_constraints() && matched > excerpt.len(),
            key,
            filters,
            matched,
        },
        trace_excerpt: excerpt,
        pc_context: pcs.into_iter().map(|pc| pc_context(bundle, pc)).collect(),
        workload_description: bundle.workload_description(),
        policy_description: bundle.policy_description(),
        metadata_summary: bundle.metadata.clone(),
    })
}

/// Retrieves one bundle per policy of the filtered workload plus a ranking by
/// `metric`, over the first filtered PC if any, else the whole trace.
pub fn retrieve_comparison(
    store: &TraceStore,
    filters: &QueryFilters,
    metric: Metric,
    excerpt_cap: usize,
) -> Result<SieveEvidence, SieveError> {
    let workload = match &filters.workload {
        Some(w) => w.clone(),
        None => {
            let workloads = store.workloads();
            match workloads.as_slice() {
                [only] => only.clone(),
                _ => {
                    return Err(SieveError::AmbiguousBundle { candidates: store.keys().cloned().collect() })
                }
            }
        }
    };
    let pc = filters.pcs.first().copied().or_else(|| filters.either.first().map(|&v| Pc(v)));
    let target = pc.map_or(Target::Workload, Target::Pc);
    let ranking = match stats::compare_policies(store, &workload, target, metric) {
        Ok(r) => r,
        Err(StatsError::PcNotFound(_)) => Vec::new(),
        Err(_) => return Err(SieveError::BundleNotFound { workload: Some(workload), policy: None }),
    };
    let mut bundles = Vec::new();
    for policy in store.policies() {
        let mut f = filters.clone();
        f.workload = Some(workload.clone());
        f.policy = Some(policy);
        match retrieve(store, &f, excerpt_cap) {
            Ok(b) => bundles.push(b),
            Err(SieveError::BundleNotFound { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let mut filters = filters.clone();
    filters.workload = Some(workload.clone());
    Ok(SieveEvidence {
        filters,
        bundles,
        comparison: Some(PolicyComparison { workload, pc, metric, ranking }),
    })
}

/// Full Sieve pass over a question: parse, then either a single-bundle
/// retrieval or, when the question compares policies without naming one, a
/// comparison across the workload's policies.
pub fn retrieve_for_question(
    store: &TraceStore,
    question: &str,
    ranker: &dyn NameRanker,
    excerpt_cap: usize,
) -> Result<SieveEvidence, SieveError> {
    let filters = parse_query(question, &store.workloads(), &store.policies(), ranker);
    if filters.policy.is_none() && intent::is_comparison(question) {
        let (metric, _) = intent::comparison_metric(question);
        return retrieve_comparison(store, &filters, metric, excerpt_cap.min(COMPARISON_EXCERPT_CAP));
    }
    let bundle = retrieve(store, &filters, excerpt_cap)?;
    Ok(SieveEvidence { filters, bundles: vec![bundle], comparison: None })
}
