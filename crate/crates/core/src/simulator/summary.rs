//! Whole-trace counters and the metadata summary string.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::record::{AccessRecord, MissType, Outcome};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub total_accesses: u64,
    pub total_misses: u64,
    pub miss_rate: f64,
    pub pct_compulsory: f64,
    pub pct_capacity: f64,
    pub pct_conflict: f64,
    pub total_evictions: u64,
    pub wrong_evictions: u64,
    pub wrong_eviction_pct: f64,
    pub recency_miss_correlation: f64,
}

/// True when the victim would have been reused before the inserted line.
pub fn is_wrong_eviction(evicted_fd: Option<u64>, inserted_fd: Option<u64>) -> bool {
    match (evicted_fd, inserted_fd) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(e), Some(i)) => e < i,
    }
}

pub fn pct(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Pearson correlation; 0 when undefined (fewer than two points or a constant series).
pub fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return 0.0;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    }
}

pub fn summarize(records: &[AccessRecord]) -> Result<TraceSummary, SimError> {
    if records.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let mut misses = 0u64;
    let (mut compulsory, mut capacity, mut conflict) = (0u64, 0u64, 0u64);
    let mut evictions = 0u64;
    let mut wrong = 0u64;
    let mut pairs = Vec::new();
    for r in records {
        if r.evict == Outcome::Miss {
            misses += 1;
        }
        match r.miss_type {
            MissType::Compulsory => compulsory += 1,
            MissType::Capacity => capacity += 1,
            MissType::Conflict => conflict += 1,
            MissType::None => {}
        }
        if r.evicted_address.is_some() {
            evictions += 1;
            if is_wrong_eviction(
                r.evicted_address_reuse_distance_numeric,
                r.accessed_address_reuse_distance_numeric,
            ) {
                wrong += 1;
            }
        }
        if let Some(rec) = r.accessed_address_recency_numeric {
            pairs.push((rec as f64, f64::from(r.is_miss())));
        }
    }
    let accesses = records.len() as u64;
    Ok(TraceSummary {
        total_accesses: accesses,
        total_misses: misses,
        miss_rate: pct(misses, accesses),
        pct_compulsory: pct(compulsory, misses),
        pct_capacity: pct(capacity, misses),
        pct_conflict: pct(conflict, misses),
        total_evictions: evictions,
        wrong_evictions: wrong,
        wrong_eviction_pct: pct(wrong, evictions),
        recency_miss_correlation: pearson(&pairs),
    })
}

/// Renders the single-line metadata string.
///
/// With `fold_compulsory` the compulsory share is reported inside the capacity
/// share and the compulsory clause is omitted.
pub fn render_metadata(s: &TraceSummary, fold_compulsory: bool) -> String {
    let breakdown = if fold_compulsory {
        format!(
            "{:.2}% capacity misses, {:.2}% conflict misses",
            s.pct_capacity + s.pct_compulsory,
            s.pct_conflict
        )
    } else {
        format!(
            "{:.2}% compulsory misses, {:.2}% capacity misses, {:.2}% conflict misses",
            s.pct_compulsory, s.pct_capacity, s.pct_conflict
        )
    };
    format!(
        "Cache Performance Summary: {} total accesses, {} total misses, {:.2}% miss rate, {breakdown}, \
         {} total evictions, {} ({:.2}%) wrong evictions where evicted line has lower reuse distance. \
         The correlation between accessed address recency and cache misses is {:.2}.",
        s.total_accesses,
        s.total_misses,
        s.miss_rate,
        s.total_evictions,
        s.wrong_evictions,
        s.wrong_eviction_pct,
        s.recency_miss_correlation,
    )
}

fn metadata_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)
            (?P<acc>[0-9,]+)\ total\ accesses[,;]\s*
            (?P<miss>[0-9,]+)\ total\ misses[,;]\s*
            (?P<mr>[0-9.]+)%\ miss\ rate[,;]\s*
            (?:(?P<comp>[0-9.]+)%\ compulsory\ misses,\s*)?
            (?P<cap>[0-9.]+)%\ capacity\ misses,\s*
            (?P<conf>[0-9.]+)%\ conflict\ misses[,;]\s*
            (?P<ev>[0-9,]+)\ total\ evictions[,;]\s*
            (?P<we>[0-9,]+)\ \((?P<wp>[0-9.]+)%\)\ wrong\ evictions
            [^.]*\.\s*
            (?:The\ correlation\ between\ accessed\ address\ recency\ and\ cache\ misses\ is\s*|Correlation\ between\ accessed-address\ recency\ and\ cache\ misses:\s*)
            (?P<r>-?[0-9.]+[0-9])",
        )
        .expect("metadata regex compiles")
    })
}

/// Parses a metadata string back into a summary (counters exact, percentages as printed).
pub fn parse_metadata(text: &str) -> Option<TraceSummary> {
    let c = metadata_regex().captures(text)?;
    let int = |name: &str| c.name(name)?.as_str().replace(',', "").parse::<u64>().ok();
    let float = |name: &str| c.name(name)?.as_str().parse::<f64>().ok();
    Some(TraceSummary {
        total_accesses: int("acc")?,
        total_misses: int("miss")?,
        miss_rate: float("mr")?,
        pct_compulsory: c.name("comp").map_or(Some(0.0), |_| float("comp"))?,
        pct_capacity: float("cap")?,
        pct_conflict: float("conf")?,
        total_evictions: int("ev")?,
        wrong_evictions: int("we")?,
        wrong_eviction_pct: float("wp")?,
        recency_miss_correlation: float("r")?,
    })
}
