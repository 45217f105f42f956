//! Lightweight question analysis shared by the retrievers and the mock clients.

use std::sync::LazyLock;

use regex::Regex;
use setscope_core::stats::Metric;

static HEX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b0x([0-9a-f]+)\b").unwrap());

/// `0x` tokens in order of appearance, as `(byte offset of the token, hex digits)`.
pub fn hex_tokens(text: &str) -> Vec<(usize, &str)> {
    HEX.captures_iter(text)
        .map(|c| (c.get(0).unwrap().start(), c.get(1).unwrap().as_str()))
        .collect()
}

/// Lowercased alphanumeric words; `_` separates words and `0x` tokens are dropped.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_lowercase)
        .filter(|w| !(w.starts_with("0x") && w.len() > 2))
        .collect()
}

/// Lowercased tokens for overlap scoring; hex tokens are kept whole.
pub fn signature_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| w.len() > 1)
        .map(str::to_ascii_lowercase)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountKind {
    Accesses,
    Misses,
    Hits,
    Evictions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    /// Which policy is best or worst by `metric`; `lowest` picks the smallest value.
    Compare { metric: Metric, lowest: bool },
    MissRate,
    HitRate,
    Count(CountKind),
    MeanReuse,
    MeanEvictedReuse,
    HitMiss,
    /// Whether a PC touches an address at all.
    Presence,
    TopMissPc,
    HotSets,
    ListPcs,
    Other,
}

fn has(q: &str, needles: &[&str]) -> bool {
    needles.iter().any(|n| q.contains(n))
}

/// Detects the comparison metric and direction named in a question.
pub fn comparison_metric(q: &str) -> (Metric, bool) {
    let q = q.to_ascii_lowercase();
    let metric = if q.contains("hit rate") {
        Metric::HitRate
    } else if q.contains("wrong eviction") {
        Metric::WrongEvictionPct
    } else if has(&q, &["fewest misses", "most misses", "number of misses"]) {
        Metric::Misses
    } else if has(&q, &["fewest hits", "most hits", "number of hits"]) {
        Metric::Hits
    } else {
        Metric::MissRate
    };
    let says_low = has(&q, &["lowest", "least", "fewest", "minimum", "smallest"]);
    let says_high = has(&q, &["highest", "most ", "maximum", "largest"]);
    let says_worst = has(&q, &["worst", "worse"]);
    // "best", "outperform" and the bare question all mean the favourable end
    let lowest = if says_low {
        true
    } else if says_high {
        false
    } else if says_worst {
        metric.higher_is_better()
    } else {
        !metric.higher_is_better()
    };
    (metric, lowest)
}

pub fn is_comparison(q: &str) -> bool {
    let q = q.to_ascii_lowercase();
    has(
        &q,
        &["which policy", "which replacement policy", "compare", "comparison", "outperform", "versus", " vs ", " vs. ", "across policies", "across all policies"],
    )
}

pub fn classify(question: &str) -> Intent {
    let q = question.to_ascii_lowercase();
    if is_comparison(&q) {
        let (metric, lowest) = comparison_metric(&q);
        return Intent::Compare { metric, lowest };
    }
    if has(&q, &["hot set", "cold set", "hot and cold", "hot cache set", "cold cache set"]) {
        return Intent::HotSets;
    }
    if has(&q, &["most misses", "majority of", "top miss", "most cache misses"]) && q.contains("pc") {
        return Intent::TopMissPc;
    }
    if has(&q, &["unique pcs", "distinct pcs", "list all pcs", "list the pcs", "which pcs"]) {
        return Intent::ListPcs;
    }
    if q.contains("miss rate") {
        return Intent::MissRate;
    }
    if q.contains("hit rate") {
        return Intent::HitRate;
    }
    if has(&q, &["how many", "number of times", "count of", "how often"]) {
        let kind = if q.contains("evict") {
            CountKind::Evictions
        } else if q.contains("miss") {
            CountKind::Misses
        } else if has(&q, &[" hit ", " hits", "hit?"]) {
            CountKind::Hits
        } else {
            CountKind::Accesses
        };
        return Intent::Count(kind);
    }
    if has(&q, &["average", "mean"]) && q.contains("reuse distance") {
        return if q.contains("evicted") { Intent::MeanEvictedReuse } else { Intent::MeanReuse };
    }
    if has(&q, &["hit or miss", "hit or a miss", "hit or cache miss", "cache hit", "cache miss", "hit or a cache miss", "does the cache hit", "result in a hit", "result in a miss"]) {
        return Intent::HitMiss;
    }
    if has(&q, &["access address", "ever access", "touch address", "accesses address"]) {
        return Intent::Presence;
    }
    Intent::Other
}
