//! Deterministic mock model that answers only from text inside the evidence
//! markers and writes query programs for the ranger prompt. Used to check that
//! nothing is lost between retrieval and scoring.

use std::sync::LazyLock;

use regex::Regex;
use setscope_core::hex::parse_hex_u64;
use setscope_core::stats::Metric;
use setscope_core::Pc;

use super::client::{ChatMessage, ClientError, ModelClient};
use super::QUESTION_HEADING;
use crate::intent::{classify, is_comparison, signature_tokens, comparison_metric, CountKind, Intent};
use crate::ranger::prompt::{PROMPT_HEADING, TRACES_HEADING};
use crate::sieve::{parse_query, LexicalRanker, EVIDENCE_END, EVIDENCE_START, NOT_FOUND_SENTINEL};

pub const EMBED_DIM: usize = 64;
pub const REJECTION: &str =
    "The premise is not supported by the trace: Exact PC, Memory Address match not found, so no verdict can be given.";
pub const UNSTATED: &str = "The evidence does not state this directly.";

static MISS_RATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([0-9]+(?:\.[0-9]+)?)% miss rate").unwrap());
static HIT_RATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([0-9]+(?:\.[0-9]+)?)% hit rate").unwrap());
static ACCESSES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([0-9]+) (?:total )?accesses\b").unwrap());
static MISSES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([0-9]+) (?:total )?misses\b").unwrap());
static HITS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([0-9]+) hits\b").unwrap());
static EVICTIONS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([0-9]+) (?:total )?evictions\b").unwrap());
static MEAN_REUSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"mean reuse distance ([0-9.]+|n/a)").unwrap());
static MEAN_EVICTED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"mean evicted reuse distance ([0-9.]+|n/a)").unwrap());
static POLICY_VALUE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^([A-Za-z0-9_]+): ([0-9.]+)").unwrap());

#[derive(Debug, Clone, Copy, Default)]
pub struct GroundedEchoClient;

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let s = text.find(start)? + start.len();
    let e = text[s..].find(end)? + s;
    Some(&text[s..e])
}

fn question_pc(q: &str) -> Option<Pc> {
    crate::intent::hex_tokens(q)
        .into_iter()
        .filter_map(|(_, d)| parse_hex_u64(d).ok())
        .find(|v| *v <= 0xffff_ffff)
        .map(Pc)
}

fn capture(re: &Regex, text: &str) -> Option<String> {
    re.captures(text).map(|c| c[1].to_string())
}

/// The line an answer should be read from: the PC's statistics line, else
/// the ranger result, else the trace metadata.
fn source_line(evidence: &str, pc: Option<Pc>) -> Option<&str> {
    if let Some(pc) = pc {
        let head = format!("PC {pc} statistics:");
        if let Some(l) = evidence.lines().find(|l| l.starts_with(&head)) {
            return Some(l);
        }
    }
    if let Some(result) = evidence.split("\nResult:\n").nth(1) {
        return Some(result.trim());
    }
    evidence.lines().find(|l| l.starts_with("Cache Performance Summary:"))
}

fn compare_answer(evidence: &str, metric: Metric, lowest: bool) -> Option<String> {
    let dir = if lowest { "Lowest" } else { "Highest" };
    let label = crate::sieve::metric_label(metric);
    if let Some(l) = evidence.lines().find(|l| l.starts_with(&format!("{dir} {label}: "))) {
        let rest = l.split_once(": ").unwrap().1.trim_end_matches('.');
        let (policy, value) = rest.split_once(' ').unwrap_or((rest, ""));
        return Some(format!("{policy} has the {} {label} {value}.", dir.to_ascii_lowercase()));
    }
    // ranger scripts emit one `policy: value` line per trace
    let result = evidence.split("\nResult:\n").nth(1)?;
    let rows: Vec<(&str, f64, &str)> = result
        .lines()
        .filter_map(|l| {
            let c = POLICY_VALUE.captures(l)?;
            let (p, v) = (c.get(1)?.as_str(), c.get(2)?.as_str());
            Some((p, v.parse().ok()?, v))
        })
        .collect();
    // the scripts report miss rate; favourable hit-rate ends flip it
    let want_low = if metric == Metric::HitRate { !lowest } else { lowest };
    let pick = if want_low {
        rows.iter().min_by(|a, b| a.1.total_cmp(&b.1))
    } else {
        rows.iter().max_by(|a, b| a.1.total_cmp(&b.1))
    }?;
    Some(format!("{} has the {} {label}.", pick.0, dir.to_ascii_lowercase()))
}

/// Answer text built only from substrings of `evidence`.
pub fn grounded_answer(question: &str, evidence: &str) -> String {
    let pc = question_pc(question);
    let absent = pc.is_some_and(|pc| evidence.contains(&format!("PC {pc} does not appear")));
    if evidence.contains(NOT_FOUND_SENTINEL) || absent {
        return REJECTION.to_string();
    }
    let line = source_line(evidence, pc).unwrap_or("");
    let subject = pc.map_or_else(|| "the trace".to_string(), |pc| format!("PC {pc}"));
    let pick = |re: &Regex, fmt: &dyn Fn(String) -> String| capture(re, line).map(fmt);
    let out = match classify(question) {
        Intent::HitMiss => evidence
            .lines()
            .find_map(|l| l.strip_prefix("Cache result: "))
            .map(|v| v.split(',').next().unwrap_or(v).trim().to_string()),
        Intent::Presence => evidence
            .lines()
            .find(|l| l.starts_with("Trace excerpt: "))
            .map(|l| format!("Yes. {l}")),
        Intent::MissRate => pick(&MISS_RATE, &|v| format!("The miss rate for {subject} is {v}%.")),
        Intent::HitRate => pick(&HIT_RATE, &|v| format!("The hit rate for {subject} is {v}%.")),
        Intent::Count(kind) => {
            let (re, what) = match kind {
                CountKind::Accesses => (&*ACCESSES, "accesses"),
                CountKind::Misses => (&*MISSES, "misses"),
                CountKind::Hits => (&*HITS, "hits"),
                CountKind::Evictions => (&*EVICTIONS, "evictions"),
            };
            pick(re, &|v| format!("{subject} has {v} {what}."))
        }
        Intent::MeanReuse => pick(&MEAN_REUSE, &|v| format!("The mean reuse distance for {subject} is {v} accesses.")),
        Intent::MeanEvictedReuse => {
            pick(&MEAN_EVICTED, &|v| format!("The mean evicted reuse distance for {subject} is {v} accesses."))
        }
        Intent::Compare { metric, lowest } => compare_answer(evidence, metric, lowest),
        _ => (!line.is_empty()).then(|| line.to_string()),
    };
    out.unwrap_or_else(|| UNSTATED.to_string())
}

fn program_for(question: &str, keys: &[(String, String)]) -> String {
    let mut workloads: Vec<String> = keys.iter().map(|k| k.0.clone()).collect();
    let mut policies: Vec<String> = keys.iter().map(|k| k.1.clone()).collect();
    workloads.dedup();
    policies.sort();
    policies.dedup();
    let f = parse_query(question, &workloads, &policies, &LexicalRanker);
    let Some((w0, p0)) = keys.first() else {
        return "metadata none/none | emit \"no traces\"".into();
    };
    let w = f.workload.clone().unwrap_or_else(|| w0.clone());
    let p = f.policy.clone().unwrap_or_else(|| {
        if policies.iter().any(|p| p == "lru") { "lru".into() } else { p0.clone() }
    });
    let pc = f.pcs.first().map(|p| p.0).or_else(|| f.either.first().copied());
    let addr = f.addresses.first().map(|a| a.0);
    let by_pc = |pc: u64| format!("from {w}/{p} | filter program_counter = {pc:#x}");
    let meta = |re: &str, emit: &str| format!("metadata {w}/{p} | extract \"{re}\" | emit \"{emit}\"");

    if f.policy.is_none() && is_comparison(question) {
        let (metric, _) = comparison_metric(question);
        let programs: Vec<String> = keys
            .iter()
            .filter(|k| k.0 == w)
            .map(|(kw, kp)| match (pc, metric) {
                (Some(pc), Metric::Misses) => format!("from {kw}/{kp} | filter program_counter = {pc:#x} | aggregate sum is_miss | emit \"{kp}: {{0}}\""),
                (Some(pc), _) => format!("from {kw}/{kp} | filter program_counter = {pc:#x} | aggregate rate_pct is_miss | emit \"{kp}: {{0}}\""),
                (None, Metric::Misses) => format!("metadata {kw}/{kp} | extract \"([0-9]+) total misses\" | emit \"{kp}: {{0}}\""),
                (None, _) => format!("metadata {kw}/{kp} | extract \"([0-9.]+)% miss rate\" | emit \"{kp}: {{0}}\""),
            })
            .collect();
        return programs.join(";\n");
    }
    match (classify(question), pc) {
        (Intent::HitMiss, Some(pc)) => match addr {
            Some(a) => format!("{} | filter memory_address = {a:#x} | group_by evict | emit \"Cache result: {{keys}}\"", by_pc(pc)),
            None => format!("{} | group_by evict | emit \"Cache result: {{keys}}\"", by_pc(pc)),
        },
        (Intent::Presence, Some(pc)) => {
            let a = addr.map_or_else(String::new, |a| format!(" | filter memory_address = {a:#x}"));
            format!("{}{a} | aggregate count | emit \"Trace excerpt: {{0}} matching records\"", by_pc(pc))
        }
        (Intent::MissRate | Intent::HitRate, Some(pc)) => format!(
            "{} | aggregate rate_pct is_miss | emit \"PC {pc:#x} statistics: {{0}}% miss rate\"",
            by_pc(pc)
        ),
        (Intent::Count(CountKind::Hits), Some(pc)) => {
            format!("{} | filter is_miss = 0 | aggregate count | emit \"PC {pc:#x} statistics: {{0}} hits\"", by_pc(pc))
        }
        (Intent::Count(_), Some(pc)) => format!(
            "{} | aggregate count, sum is_miss, count evicted_address | emit \"PC {pc:#x} statistics: {{0}} accesses, {{1}} misses, {{2}} evictions\"",
            by_pc(pc)
        ),
        (Intent::MeanReuse, Some(pc)) => format!(
            "{} | aggregate mean accessed_address_reuse_distance_numeric | emit \"PC {pc:#x} statistics: mean reuse distance {{0}} accesses\"",
            by_pc(pc)
        ),
        (Intent::MeanEvictedReuse, Some(pc)) => format!(
            "{} | aggregate mean evicted_address_reuse_distance_numeric | emit \"PC {pc:#x} statistics: mean evicted reuse distance {{0}} accesses\"",
            by_pc(pc)
        ),
        (Intent::MissRate, None) => meta("([0-9.]+)% miss rate", "{0}% miss rate"),
        (Intent::Count(CountKind::Misses), None) => meta("([0-9]+) total misses", "{0} total misses"),
        (Intent::Count(CountKind::Evictions), None) => meta("([0-9]+) total evictions", "{0} total evictions"),
        (Intent::Count(_), None) => meta("([0-9]+) total accesses", "{0} total accesses"),
        (Intent::TopMissPc, _) => format!(
            "from {w}/{p} | filter is_miss = 1 | group_by program_counter | aggregate count | sort value desc | limit 1 | emit \"PC {{top_key}} has the most misses ({{top_value}})\""
        ),
        (Intent::ListPcs, _) => format!("from {w}/{p} | group_by program_counter | emit \"{{count}} unique PCs: {{keys}}\""),
        (Intent::HotSets, _) => format!(
            "from {w}/{p} | group_by cache_set_id | aggregate rate_pct is_miss, count | sort value asc | limit 5 | emit \"Sets with the lowest miss rate (set: miss rate, accesses): {{rows}}\""
        ),
        _ => meta("(.+)", "{0}"),
    }
}

fn prompt_keys(system: &str) -> Vec<(String, String)> {
    system
        .split(TRACES_HEADING)
        .nth(1)
        .unwrap_or("")
        .lines()
        .skip(1)
        .map_while(|l| l.strip_prefix("- "))
        .filter_map(|id| id.split_once("_evictions_"))
        .map(|(w, p)| (w.to_string(), p.to_string()))
        .collect()
}

impl ModelClient for GroundedEchoClient {
    fn chat(&self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let system = messages.first().map_or("", |m| m.content.as_str());
        if system.contains(PROMPT_HEADING) {
            let question = messages.get(1).map_or("", |m| m.content.as_str());
            return Ok(program_for(question, &prompt_keys(system)));
        }
        let last = messages.last().map_or("", |m| m.content.as_str());
        let evidence = between(last, EVIDENCE_START, EVIDENCE_END).unwrap_or("");
        let question = last.split(QUESTION_HEADING).nth(1).unwrap_or(last).trim();
        Ok(grounded_answer(question, evidence))
    }

    /// Hashed bag of signature tokens, L2-normalized.
    fn embed(&self, text: &str) -> Option<Result<Vec<f32>, ClientError>> {
        let mut v = vec![0f32; EMBED_DIM];
        for t in signature_tokens(text) {
            // FNV-1a keeps the vector stable across runs and platforms
            let h = t.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3));
            v[(h % EMBED_DIM as u64) as usize] += 1.0;
        }
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        Some(Ok(v))
    }

    fn name(&self) -> String {
        "grounded-echo".into()
    }
}
