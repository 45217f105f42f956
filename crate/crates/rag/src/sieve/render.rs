//! Deterministic text rendering of retrieved evidence.

use std::fmt::Write;

use setscope_core::stats::{Metric, PcStats};
use setscope_core::{AccessRecord, Outcome};

use super::{ContextBundle, PcContext, PolicyComparison, SieveEvidence};

pub const EVIDENCE_START: &str = "=== EVIDENCE ===";
pub const EVIDENCE_END: &str = "=== END EVIDENCE ===";
/// Rendered in place of the excerpt when the filters matched no record.
pub const NOT_FOUND_SENTINEL: &str = "Exact PC, Memory Address match not found";

fn opt_f(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

pub(crate) fn stats_line(s: &PcStats) -> String {
    format!(
        "{} accesses, {} hits, {} misses, {:.2}% miss rate, {:.2}% hit rate, mean reuse distance {} accesses, \
         mean evicted reuse distance {} accesses, {} evictions, {} ({:.2}%) wrong evictions, {} accesses never reused.",
        s.accesses,
        s.hits,
        s.misses,
        s.miss_rate,
        s.hit_rate(),
        opt_f(s.mean_reuse_distance),
        opt_f(s.mean_evicted_reuse_distance),
        s.eviction_count,
        s.wrong_evictions,
        s.wrong_eviction_pct,
        s.never_reused,
    )
}

fn pc_block(out: &mut String, id: &str, c: &PcContext) {
    match &c.stats {
        Some(s) => writeln!(out, "PC {} statistics: {}", c.pc, stats_line(s)).unwrap(),
        None => writeln!(out, "PC {} statistics: PC {} does not appear in {id}.", c.pc, c.pc).unwrap(),
    }
    if !c.function_name.is_empty() {
        writeln!(out, "Source Function: {}", c.function_name).unwrap();
    }
    if !c.assembly_code.is_empty() {
        writeln!(out, "Assembly code snippet for PC {} (representative instructions):", c.pc).unwrap();
        for line in c.assembly_code.lines() {
            writeln!(out, "  {line}").unwrap();
        }
    }
}

fn pairs<A: std::fmt::Display, B: std::fmt::Display>(items: impl Iterator<Item = (A, B)>) -> String {
    let v: Vec<String> = items.map(|(a, b)| format!("{{{a}, {b}}}")).collect();
    if v.is_empty() {
        "(none)".to_string()
    } else {
        v.join(", ")
    }
}

fn record_block(out: &mut String, n: usize, workload: &str, policy: &str, r: &AccessRecord) {
    writeln!(
        out,
        "Record {n}: For policy {policy} on workload {workload} at PC {} and address {}:",
        r.program_counter, r.memory_address
    )
    .unwrap();
    writeln!(out, "Cache result: {}", r.evict).unwrap();
    writeln!(out, "Set ID: {} ({:#b})", r.cache_set_id, r.cache_set_id).unwrap();
    writeln!(out, "Miss type: {}", r.miss_type).unwrap();
    match (r.evict, r.evicted_address) {
        (Outcome::Miss, Some(ev)) => writeln!(
            out,
            "Evicted address: {ev} ({}), Inserted address {}.",
            r.evicted_address_reuse_distance(),
            r.accessed_address_reuse_distance()
        )
        .unwrap(),
        (Outcome::Miss, None) => writeln!(
            out,
            "No eviction (line bypassed or free way), Inserted address {}.",
            r.accessed_address_reuse_distance()
        )
        .unwrap(),
        (Outcome::Hit, _) => {
            writeln!(out, "No eviction, Accessed address {}.", r.accessed_address_reuse_distance()).unwrap()
        }
    }
    writeln!(out, "Accessed address recency: {}", r.accessed_address_recency()).unwrap();
    writeln!(out, "Cache lines: {}", pairs(r.current_cache_lines.iter().map(|(p, a)| (a, p)))).unwrap();
    writeln!(out, "Access history: {}", pairs(r.recent_access_history.iter().map(|(p, a)| (a, p)))).unwrap();
    writeln!(out, "Cache line scores: {}", pairs(r.cache_line_eviction_scores.iter().map(|(a, s)| (a.0, s)))).unwrap();
}

/// Renders one bundle: provenance, descriptions, metadata, per-PC context
/// and the excerpt. Identical bundles render to identical bytes.
pub fn render_context(b: &ContextBundle) -> String {
    let key = &b.provenance.key;
    let id = key.canonical_id();
    let mut out = String::new();
    writeln!(out, "Trace: {id}").unwrap();
    writeln!(out, "Filters: {}", b.provenance.filters.describe()).unwrap();
    writeln!(out, "Workloads involved:\n{}", b.workload_description.trim_end()).unwrap();
    writeln!(out, "Policies involved:\n{}", b.policy_description.trim_end()).unwrap();
    writeln!(out, "Trace metadata:\n{}", b.metadata_summary.trim_end()).unwrap();
    for c in &b.pc_context {
        pc_block(&mut out, &id, c);
    }
    if !b.provenance.filters.has_record_constraints() {
        writeln!(out, "Trace excerpt: no PC, address or set filter; {} records summarized above.", b.provenance.matched)
            .unwrap();
    } else if b.provenance.matched == 0 {
        writeln!(out, "{NOT_FOUND_SENTINEL}").unwrap();
    } else {
        writeln!(
            out,
            "Trace excerpt: {} of {} matching records{}",
            b.trace_excerpt.len(),
            b.provenance.matched,
            if b.provenance.truncated { " (truncated)" } else { "" }
        )
        .unwrap();
        for (i, r) in b.trace_excerpt.iter().enumerate() {
            record_block(&mut out, i + 1, key.workload(), key.policy(), r);
        }
    }
    out
}

pub fn metric_label(m: Metric) -> &'static str {
    match m {
        Metric::MissRate => "miss rate",
        Metric::HitRate => "hit rate",
        Metric::Misses => "misses",
        Metric::Hits => "hits",
        Metric::WrongEvictionPct => "wrong eviction percentage",
    }
}

fn metric_value(m: Metric, v: f64) -> String {
    match m {
        Metric::Misses | Metric::Hits => format!("{v:.0}"),
        _ => format!("{v:.2}%"),
    }
}

fn comparison_block(out: &mut String, c: &PolicyComparison) {
    let scope = match c.pc {
        Some(pc) => format!("PC {pc} on workload {}", c.workload),
        None => format!("workload {}", c.workload),
    };
    let label = metric_label(c.metric);
    if c.ranking.is_empty() {
        writeln!(out, "Policy comparison: {scope} has no accesses under any policy.").unwrap();
        return;
    }
    let listed: Vec<String> =
        c.ranking.iter().map(|r| format!("{} {}", r.policy, metric_value(c.metric, r.value))).collect();
    writeln!(out, "Policy comparison for {scope} by {label} (best first): {}.", listed.join(", ")).unwrap();
    let (best, worst) = (&c.ranking[0], &c.ranking[c.ranking.len() - 1]);
    let (low, high) = if c.metric.higher_is_better() { (worst, best) } else { (best, worst) };
    writeln!(out, "Lowest {label}: {} ({}).", low.policy, metric_value(c.metric, low.value)).unwrap();
    writeln!(out, "Highest {label}: {} ({}).", high.policy, metric_value(c.metric, high.value)).unwrap();
}

/// Wraps all bundles (and a policy comparison, if any) in evidence markers.
pub fn render_evidence(e: &SieveEvidence) -> String {
    let mut out = String::new();
    writeln!(out, "{EVIDENCE_START}").unwrap();
    if let Some(c) = &e.comparison {
        comparison_block(&mut out, c);
    }
    for (i, b) in e.bundles.iter().enumerate() {
        if i > 0 {
            writeln!(out, "---").unwrap();
        }
        out.push_str(&render_context(b));
    }
    writeln!(out, "{EVIDENCE_END}").unwrap();
    out
}
