//! Per-PC and per-set statistics over record tables.
//!
//! Every function here is a pure query over records. Orderings that could tie
//! are broken deterministically (by PC, set id or policy name) so outputs are
//! total orders.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::hex::Pc;
use crate::record::{AccessRecord, Outcome};
use crate::simulator::summary::{is_wrong_eviction, pct};
use crate::store::TraceStore;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("PC {0} not found in trace")]
    PcNotFound(Pc),
    #[error("workload `{0}` not found")]
    WorkloadNotFound(String),
    #[error("only {eligible} sets have at least {min_accesses} accesses, {requested} requested")]
    NotEnoughSets { eligible: usize, requested: usize, min_accesses: u64 },
    #[error("trace slice has no misses")]
    NoMisses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcStats {
    pub pc: Pc,
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub miss_rate: f64,
    /// Mean forward reuse distance of this PC's accesses (reused accesses only).
    pub mean_reuse_distance: Option<f64>,
    /// Sample standard deviation of the same; absent below two samples.
    pub std_reuse_distance: Option<f64>,
    /// Mean forward reuse distance of lines evicted by this PC's misses.
    pub mean_evicted_reuse_distance: Option<f64>,
    pub eviction_count: u64,
    pub wrong_evictions: u64,
    pub wrong_eviction_pct: f64,
    /// Accesses whose address is never touched again.
    pub never_reused: u64,
}

impl PcStats {
    pub fn hit_rate(&self) -> f64 {
        pct(self.hits, self.accesses)
    }
}

#[derive(Default)]
struct Acc {
    accesses: u64,
    hits: u64,
    reuse: Vec<f64>,
    evicted_reuse: Vec<f64>,
    evictions: u64,
    wrong: u64,
    never_reused: u64,
}

impl Acc {
    fn add(&mut self, r: &AccessRecord) {
        self.accesses += 1;
        if r.evict == Outcome::Hit {
            self.hits += 1;
        }
        match r.accessed_address_reuse_distance_numeric {
            Some(d) => self.reuse.push(d as f64),
            None => self.never_reused += 1,
        }
        if r.evicted_address.is_some() {
            self.evictions += 1;
            if let Some(d) = r.evicted_address_reuse_distance_numeric {
                self.evicted_reuse.push(d as f64);
            }
            if is_wrong_eviction(
                r.evicted_address_reuse_distance_numeric,
                r.accessed_address_reuse_distance_numeric,
            ) {
                self.wrong += 1;
            }
        }
    }

    fn finish(self, pc: Pc) -> PcStats {
        let misses = self.accesses - self.hits;
        PcStats {
            pc,
            accesses: self.accesses,
            hits: self.hits,
            misses,
            miss_rate: pct(misses, self.accesses),
            mean_reuse_distance: mean(&self.reuse),
            std_reuse_distance: sample_std(&self.reuse),
            mean_evicted_reuse_distance: mean(&self.evicted_reuse),
            eviction_count: self.evictions,
            wrong_evictions: self.wrong,
            wrong_eviction_pct: pct(self.wrong, self.evictions),
            never_reused: self.never_reused,
        }
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    Some(var.sqrt())
}

pub fn pc_stats(records: &[AccessRecord], pc: Pc) -> Result<PcStats, StatsError> {
    let mut acc = Acc::default();
    for r in records.iter().filter(|r| r.program_counter == pc) {
        acc.add(r);
    }
    if acc.accesses == 0 {
        return Err(StatsError::PcNotFound(pc));
    }
    Ok(acc.finish(pc))
}

/// Statistics for every PC in one pass, sorted by PC.
pub fn all_pc_stats(records: &[AccessRecord]) -> Vec<PcStats> {
    let mut by_pc: BTreeMap<Pc, Acc> = BTreeMap::new();
    for r in records {
        by_pc.entry(r.program_counter).or_default().add(r);
    }
    by_pc.into_iter().map(|(pc, acc)| acc.finish(pc)).collect()
}

pub fn count_events<F: Fn(&AccessRecord) -> bool>(records: &[AccessRecord], predicate: F) -> usize {
    records.iter().filter(|r| predicate(r)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopMissPc {
    pub pc: Pc,
    pub misses: u64,
    pub accesses: u64,
}

impl TopMissPc {
    pub fn miss_rate(&self) -> f64 {
        pct(self.misses, self.accesses)
    }
}

/// PC with the most misses; ties go to the lower PC.
pub fn top_miss_pc(records: &[AccessRecord]) -> Result<TopMissPc, StatsError> {
    let mut best: Option<TopMissPc> = None;
    for s in all_pc_stats(records) {
        if s.misses == 0 {
            continue;
        }
        // all_pc_stats is PC-ascending, so strict > keeps the lower PC on ties
        if best.is_none_or(|b| s.misses > b.misses) {
            best = Some(TopMissPc { pc: s.pc, misses: s.misses, accesses: s.accesses });
        }
    }
    best.ok_or(StatsError::NoMisses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetStats {
    pub set_id: u32,
    pub accesses: u64,
    pub hits: u64,
    pub hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetHotness {
    pub hot: Vec<SetStats>,
    pub cold: Vec<SetStats>,
    /// All sets with at least one access, by set id.
    pub table: Vec<SetStats>,
}

pub const DEFAULT_MIN_SET_ACCESSES: u64 = 16;

pub fn set_stats(records: &[AccessRecord]) -> Vec<SetStats> {
    let mut by_set: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for r in records {
        let e = by_set.entry(r.cache_set_id).or_default();
        e.0 += 1;
        if r.evict == Outcome::Hit {
            e.1 += 1;
        }
    }
    by_set
        .into_iter()
        .map(|(set_id, (accesses, hits))| SetStats { set_id, accesses, hits, hit_rate: pct(hits, accesses) })
        .collect()
}

/// Top-k and bottom-k sets by hit rate among sets with `min_accesses` or more.
pub fn set_hotness(records: &[AccessRecord], k: usize, min_accesses: u64) -> Result<SetHotness, StatsError> {
    let table = set_stats(records);
    let mut eligible: Vec<&SetStats> = table.iter().filter(|s| s.accesses >= min_accesses).collect();
    if k == 0 || eligible.len() < k {
        return Err(StatsError::NotEnoughSets { eligible: eligible.len(), requested: k, min_accesses });
    }
    eligible.sort_by(|a, b| b.hit_rate.total_cmp(&a.hit_rate).then(a.set_id.cmp(&b.set_id)));
    let hot = eligible.iter().take(k).map(|s| (*s).clone()).collect();
    eligible.sort_by(|a, b| a.hit_rate.total_cmp(&b.hit_rate).then(a.set_id.cmp(&b.set_id)));
    let cold = eligible.iter().take(k).map(|s| (*s).clone()).collect();
    Ok(SetHotness { hot, cold, table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BypassCandidate {
    pub pc: Pc,
    pub stats: PcStats,
    pub reason: String,
}

fn cmp_reuse_desc(a: Option<f64>, b: Option<f64>) -> Ordering {
    // a PC whose lines are never reused counts as infinitely far
    let key = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
    key(b).total_cmp(&key(a))
}

/// PCs ordered from most to least bypass-worthy: lowest hit rate first, then
/// longest mean reuse distance, then PC.
pub fn bypass_candidates(records: &[AccessRecord], max_candidates: usize) -> Vec<BypassCandidate> {
    let mut stats = all_pc_stats(records);
    stats.sort_by(|a, b| {
        a.hit_rate()
            .total_cmp(&b.hit_rate())
            .then_with(|| cmp_reuse_desc(a.mean_reuse_distance, b.mean_reuse_distance))
            .then(a.pc.cmp(&b.pc))
    });
    stats
        .into_iter()
        .take(max_candidates)
        .map(|s| {
            let reuse = match s.mean_reuse_distance {
                Some(d) => format!("mean reuse distance {d:.2} accesses"),
                None => "lines never reused".to_string(),
            };
            let reason = format!(
                "hit rate {:.2}% over {} accesses, {reuse}, {} of {} accesses never reused",
                s.hit_rate(),
                s.accesses,
                s.never_reused,
                s.accesses
            );
            BypassCandidate { pc: s.pc, stats: s, reason }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VarianceGroups {
    pub low: Vec<(Pc, f64)>,
    pub medium: Vec<(Pc, f64)>,
    pub high: Vec<(Pc, f64)>,
    /// PCs with fewer than two reused accesses.
    pub unclassified: Vec<Pc>,
    /// Upper bounds of the low and medium buckets.
    pub thresholds: (f64, f64),
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Buckets PCs by the spread of their forward reuse distance, using the
/// 1/3 and 2/3 quantiles of the observed standard deviations as cut points.
/// When all deviations are equal the cut points coincide and every PC is `low`.
pub fn group_pcs_by_reuse_variance(records: &[AccessRecord]) -> VarianceGroups {
    let mut groups = VarianceGroups::default();
    let mut classified = Vec::new();
    for s in all_pc_stats(records) {
        match s.std_reuse_distance {
            Some(sd) => classified.push((s.pc, sd)),
            None => groups.unclassified.push(s.pc),
        }
    }
    if classified.is_empty() {
        return groups;
    }
    let mut sorted: Vec<f64> = classified.iter().map(|c| c.1).collect();
    sorted.sort_by(f64::total_cmp);
    let (t1, t2) = (quantile(&sorted, 1.0 / 3.0), quantile(&sorted, 2.0 / 3.0));
    groups.thresholds = (t1, t2);
    for (pc, sd) in classified {
        if sd <= t1 {
            groups.low.push((pc, sd));
        } else if sd <= t2 {
            groups.medium.push((pc, sd));
        } else {
            groups.high.push((pc, sd));
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MissRate,
    HitRate,
    Misses,
    Hits,
    WrongEvictionPct,
}

impl Metric {
    /// True when a larger value is better.
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::HitRate | Metric::Hits)
    }

    fn of(self, s: &PcStats) -> f64 {
        match self {
            Metric::MissRate => s.miss_rate,
            Metric::HitRate => s.hit_rate(),
            Metric::Misses => s.misses as f64,
            Metric::Hits => s.hits as f64,
            Metric::WrongEvictionPct => s.wrong_eviction_pct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Pc(Pc),
    Workload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRank {
    pub policy: String,
    pub value: f64,
}

/// Aggregate over a whole record table, packaged as `PcStats` with PC 0.
fn whole_trace_stats(records: &[AccessRecord]) -> PcStats {
    let mut acc = Acc::default();
    for r in records {
        acc.add(r);
    }
    acc.finish(Pc(0))
}

/// Ranks the workload's policies best-first by `metric`; ties by policy name.
/// Policies whose trace never executes the target PC are left out.
pub fn compare_policies(
    store: &TraceStore,
    workload: &str,
    target: Target,
    metric: Metric,
) -> Result<Vec<PolicyRank>, StatsError> {
    let bundles: Vec<_> = store.bundles().filter(|b| b.key.workload() == workload).collect();
    if bundles.is_empty() {
        return Err(StatsError::WorkloadNotFound(workload.to_string()));
    }
    let mut ranks = Vec::new();
    for b in bundles {
        let stats = match target {
            Target::Workload => whole_trace_stats(&b.records),
            Target::Pc(pc) => match pc_stats(&b.records, pc) {
                Ok(s) => s,
                Err(_) => continue,
            },
        };
        ranks.push(PolicyRank { policy: b.key.policy().to_string(), value: metric.of(&stats) });
    }
    if let (Target::Pc(pc), true) = (target, ranks.is_empty()) {
        return Err(StatsError::PcNotFound(pc));
    }
    ranks.sort_by(|a, b| {
        let ord = a.value.total_cmp(&b.value);
        let ord = if metric.higher_is_better() { ord.reverse() } else { ord };
        ord.then_with(|| a.policy.cmp(&b.policy))
    });
    Ok(ranks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hex::Address;
    use crate::key::TraceKey;
    use crate::record::MissType;
    use crate::simulator::{simulate, Access, CacheConfig, PolicySpec};
    use crate::store::TraceBundle;
    use proptest::prelude::*;

    fn rec(pc: u64, set: u32, hit: bool) -> AccessRecord {
        let mut r = AccessRecord::new(Pc(pc), Address(0x1000 + u64::from(set)), set, if hit { Outcome::Hit } else { Outcome::Miss });
        if !hit {
            r.miss_type = MissType::Capacity;
        }
        r
    }

    fn with_reuse(mut r: AccessRecord, d: Option<u64>) -> AccessRecord {
        r.accessed_address_reuse_distance_numeric = d;
        r
    }

    /// Ten records over three PCs with known per-field values.
    fn ten() -> Vec<AccessRecord> {
        let mut v = vec![
            with_reuse(rec(0x401e31, 0, false), Some(4)),
            with_reuse(rec(0x401e31, 0, true), Some(6)),
            with_reuse(rec(0x401e31, 1, false), None),
            with_reuse(rec(0x401e31, 1, true), Some(8)),
            with_reuse(rec(0x405832, 2, false), Some(100)),
            with_reuse(rec(0x405832, 2, false), None),
            with_reuse(rec(0x405832, 3, false), Some(300)),
            with_reuse(rec(0x409270, 3, true), Some(1)),
            with_reuse(rec(0x409270, 3, true), Some(1)),
            with_reuse(rec(0x405832, 0, true), Some(200)),
        ];
        // two evictions by 0x405832: one wrong (victim sooner than inserted), one fine
        v[4].evicted_address = Some(Address(0x9));
        v[4].evicted_address_reuse_distance_numeric = Some(50);
        v[6].evicted_address = Some(Address(0xa));
        v[6].evicted_address_reuse_distance_numeric = None;
        v
    }

    /// Independent flat recomputation of every field.
    fn oracle(records: &[AccessRecord], pc: Pc) -> PcStats {
        let mine: Vec<&AccessRecord> = records.iter().filter(|r| r.program_counter == pc).collect();
        let accesses = mine.len() as u64;
        let hits = mine.iter().filter(|r| r.is_miss() == 0).count() as u64;
        let reuse: Vec<f64> = mine.iter().filter_map(|r| r.accessed_address_reuse_distance_numeric).map(|d| d as f64).collect();
        let n = reuse.len() as f64;
        let m = if reuse.is_empty() { None } else { Some(reuse.iter().sum::<f64>() / n) };
        let sd = if reuse.len() < 2 {
            None
        } else {
            let mm = m.unwrap();
            Some((reuse.iter().map(|x| (x - mm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
        };
        let ev: Vec<&&AccessRecord> = mine.iter().filter(|r| r.evicted_address.is_some()).collect();
        let evd: Vec<f64> = ev.iter().filter_map(|r| r.evicted_address_reuse_distance_numeric).map(|d| d as f64).collect();
        let wrong = ev
            .iter()
            .filter(|r| match (r.evicted_address_reuse_distance_numeric, r.accessed_address_reuse_distance_numeric) {
                (Some(e), Some(i)) => e < i,
                (Some(_), None) => true,
                _ => false,
            })
            .count() as u64;
        PcStats {
            pc,
            accesses,
            hits,
            misses: accesses - hits,
            miss_rate: if accesses == 0 { 0.0 } else { 100.0 * (accesses - hits) as f64 / accesses as f64 },
            mean_reuse_distance: m,
            std_reuse_distance: sd,
            mean_evicted_reuse_distance: if evd.is_empty() { None } else { Some(evd.iter().sum::<f64>() / evd.len() as f64) },
            eviction_count: ev.len() as u64,
            wrong_evictions: wrong,
            wrong_eviction_pct: if ev.is_empty() { 0.0 } else { 100.0 * wrong as f64 / ev.len() as f64 },
            never_reused: mine.iter().filter(|r| r.accessed_address_reuse_distance_numeric.is_none()).count() as u64,
        }
    }

    fn approx_eq(a: &PcStats, b: &PcStats) -> bool {
        let f = |x: Option<f64>, y: Option<f64>| match (x, y) {
            (Some(x), Some(y)) => (x - y).abs() < 1e-9,
            (None, None) => true,
            _ => false,
        };
        a.pc == b.pc
            && a.accesses == b.accesses
            && a.hits == b.hits
            && a.misses == b.misses
            && (a.miss_rate - b.miss_rate).abs() < 1e-9
            && f(a.mean_reuse_distance, b.mean_reuse_distance)
            && f(a.std_reuse_distance, b.std_reuse_distance)
            && f(a.mean_evicted_reuse_distance, b.mean_evicted_reuse_distance)
            && a.eviction_count == b.eviction_count
            && a.wrong_evictions == b.wrong_evictions
            && (a.wrong_eviction_pct - b.wrong_eviction_pct).abs() < 1e-9
            && a.never_reused == b.never_reused
    }

    #[test]
    fn pc_stats_on_fixture() {
        let recs = ten();
        let s = pc_stats(&recs, Pc(0x401e31)).unwrap();
        assert_eq!((s.accesses, s.hits, s.misses), (4, 2, 2));
        assert_eq!(s.miss_rate, 50.0);
        assert_eq!(s.mean_reuse_distance, Some(6.0));
        assert_eq!(s.std_reuse_distance, Some(2.0));
        let s = pc_stats(&recs, Pc(0x405832)).unwrap();
        assert_eq!(s.eviction_count, 2);
        assert_eq!(s.wrong_evictions, 1);
        assert_eq!(s.wrong_eviction_pct, 50.0);
        assert_eq!(s.mean_evicted_reuse_distance, Some(50.0));
        for pc in [0x401e31, 0x405832, 0x409270] {
            assert!(approx_eq(&pc_stats(&recs, Pc(pc)).unwrap(), &oracle(&recs, Pc(pc))));
        }
        assert_eq!(pc_stats(&recs, Pc(0xdead)), Err(StatsError::PcNotFound(Pc(0xdead))));
    }

    #[test]
    fn symmetric_hit_miss() {
        let recs = vec![rec(1, 0, false), rec(1, 0, true), rec(1, 0, false), rec(1, 0, true)];
        assert_eq!(pc_stats(&recs, Pc(1)).unwrap().miss_rate, 50.0);
    }

    #[test]
    fn top_miss() {
        let mut recs: Vec<AccessRecord> = (0..7).map(|_| rec(0x400512, 0, false)).collect();
        recs.extend((0..3).map(|_| rec(0x400100, 0, false)));
        recs.extend((0..4).map(|_| rec(0x400512, 0, true)));
        let top = top_miss_pc(&recs).unwrap();
        assert_eq!((top.pc, top.misses), (Pc(0x400512), 7));
        assert!((top.miss_rate() - 100.0 * 7.0 / 11.0).abs() < 1e-9);
        let single = vec![rec(0x42, 0, false)];
        assert_eq!(top_miss_pc(&single).unwrap().pc, Pc(0x42));
        let ties = vec![rec(0x50, 0, false), rec(0x40, 0, false)];
        assert_eq!(top_miss_pc(&ties).unwrap().pc, Pc(0x40));
        assert_eq!(top_miss_pc(&[rec(1, 0, true)]), Err(StatsError::NoMisses));
    }

    #[test]
    fn counting() {
        let mut recs: Vec<AccessRecord> = (0..4).map(|i| rec(0x405832, i, i % 2 == 0)).collect();
        recs.extend((0..6).map(|i| rec(0x400000, i, true)));
        assert_eq!(count_events(&recs, |r| r.program_counter == Pc(0x405832)), 4);
        assert_eq!(count_events(&[], |_| true), 0);
        let all_hit: Vec<AccessRecord> = (0..5).map(|i| rec(1, i, true)).collect();
        assert_eq!(count_events(&all_hit, |r| r.evict == Outcome::Miss), 0);
    }

    fn sets_fixture() -> Vec<AccessRecord> {
        // set 0: 10%, set 1: 50%, set 2: 90% over 20 accesses each; set 3: 100% with 2 accesses
        let mut v = Vec::new();
        for (set, hits) in [(0u32, 2), (1, 10), (2, 18)] {
            for i in 0..20 {
                v.push(rec(0x1, set, i < hits));
            }
        }
        v.push(rec(0x1, 3, true));
        v.push(rec(0x1, 3, true));
        v
    }

    #[test]
    fn hotness_by_hand() {
        let h = set_hotness(&sets_fixture(), 1, 16).unwrap();
        assert_eq!(h.hot[0].set_id, 2);
        assert_eq!(h.cold[0].set_id, 0);
        let h = set_hotness(&sets_fixture(), 3, 16).unwrap();
        assert_eq!(h.hot.iter().map(|s| s.set_id).collect::<Vec<_>>(), [2, 1, 0]);
        assert_eq!(h.cold.iter().map(|s| s.set_id).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(h.table.len(), 4);
        let h = set_hotness(&sets_fixture(), 1, 1).unwrap();
        assert_eq!(h.hot[0].set_id, 3);
        assert!(matches!(set_hotness(&sets_fixture(), 4, 16), Err(StatsError::NotEnoughSets { eligible: 3, .. })));
    }

    #[test]
    fn hotness_all_equal_uses_set_order() {
        let recs: Vec<AccessRecord> = (0..5u32).rev().flat_map(|s| (0..16).map(move |_| rec(1, s, true))).collect();
        let h = set_hotness(&recs, 2, 16).unwrap();
        assert_eq!(h.hot.iter().map(|s| s.set_id).collect::<Vec<_>>(), [0, 1]);
        assert_eq!(h.cold.iter().map(|s| s.set_id).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn variance_groups() {
        let mut recs = Vec::new();
        // sample std of {m - d, m, m + d} is d: stds 0, 5, 50
        for (pc, m, d) in [(1u64, 10u64, 0u64), (2, 100, 5), (3, 1000, 50)] {
            for x in [m - d, m, m + d] {
                recs.push(with_reuse(rec(pc, 0, true), Some(x)));
            }
        }
        let g = group_pcs_by_reuse_variance(&recs);
        assert_eq!(g.low.iter().map(|x| x.0).collect::<Vec<_>>(), [Pc(1)]);
        assert_eq!(g.medium.iter().map(|x| x.0).collect::<Vec<_>>(), [Pc(2)]);
        assert_eq!(g.high.iter().map(|x| x.0).collect::<Vec<_>>(), [Pc(3)]);
        assert_eq!(g.low[0].1, 0.0);
        assert!((g.medium[0].1 - 5.0).abs() < 1e-12);
        assert!((g.high[0].1 - 50.0).abs() < 1e-12);

        recs.push(with_reuse(rec(4, 0, true), Some(5)));
        let g = group_pcs_by_reuse_variance(&recs);
        assert_eq!(g.unclassified, [Pc(4)]);

        let same: Vec<AccessRecord> = (1..=3u64)
            .flat_map(|pc| [with_reuse(rec(pc, 0, true), Some(1)), with_reuse(rec(pc, 0, true), Some(3))])
            .collect();
        let g = group_pcs_by_reuse_variance(&same);
        assert_eq!(g.low.len(), 3);
        assert!(g.medium.is_empty() && g.high.is_empty());
    }

    #[test]
    fn bypass_order() {
        let mut recs = Vec::new();
        // streaming PC: no hits, never reused or far reuse
        for i in 0..10 {
            recs.push(with_reuse(rec(0xbad, 0, false), if i % 2 == 0 { None } else { Some(5000) }));
        }
        // reuse PC: 90% hits, short distances
        for i in 0..10 {
            recs.push(with_reuse(rec(0x600d, 0, i != 0), Some(3)));
        }
        // perfect PC: always hits
        for _ in 0..5 {
            recs.push(with_reuse(rec(0x100, 0, true), Some(1)));
        }
        let c = bypass_candidates(&recs, 10);
        assert_eq!(c.iter().map(|c| c.pc).collect::<Vec<_>>(), [Pc(0xbad), Pc(0x600d), Pc(0x100)]);
        assert!(c[0].reason.starts_with("hit rate 0.00%"));
        assert_eq!(bypass_candidates(&recs, 1).len(), 1);
    }

    fn store_for_compare() -> TraceStore {
        let t: Vec<Access> = [0xa0u64, 0xb0, 0xa0, 0xc0, 0xb0, 0xa0].iter().map(|&a| Access::new(0x409270, a)).collect();
        let cfg = CacheConfig::new(1, 2, 1).unwrap();
        let mut store = TraceStore::new();
        for p in [PolicySpec::Lru, PolicySpec::Belady] {
            store.insert(simulate("t1", &t, &cfg, &p).unwrap()).unwrap();
        }
        store
    }

    #[test]
    fn compare_on_example_trace() {
        let store = store_for_compare();
        let r = compare_policies(&store, "t1", Target::Workload, Metric::MissRate).unwrap();
        assert_eq!(r[0].policy, "belady");
        assert!((r[0].value - 100.0 * 4.0 / 6.0).abs() < 1e-9);
        assert!((r[1].value - 100.0 * 5.0 / 6.0).abs() < 1e-9);
        let r = compare_policies(&store, "t1", Target::Pc(Pc(0x409270)), Metric::HitRate).unwrap();
        assert_eq!(r[0].policy, "belady");
        assert!(matches!(compare_policies(&store, "nope", Target::Workload, Metric::MissRate), Err(StatsError::WorkloadNotFound(_))));
        assert!(matches!(compare_policies(&store, "t1", Target::Pc(Pc(1)), Metric::MissRate), Err(StatsError::PcNotFound(_))));
    }

    #[test]
    fn compare_single_policy_and_ties() {
        let mut store = TraceStore::new();
        let recs = vec![rec(1, 0, true)];
        for p in ["zeta", "alpha"] {
            store
                .insert(TraceBundle { key: TraceKey::new("w", p).unwrap(), records: recs.clone(), metadata: String::new(), description: String::new() })
                .unwrap();
        }
        let r = compare_policies(&store, "w", Target::Workload, Metric::MissRate).unwrap();
        assert_eq!(r.iter().map(|x| x.policy.as_str()).collect::<Vec<_>>(), ["alpha", "zeta"]);
        let r = compare_policies(&store_for_compare(), "t1", Target::Workload, Metric::Misses).unwrap();
        assert_eq!(r.len(), 2);
    }

    fn arb_records() -> impl Strategy<Value = Vec<AccessRecord>> {
        proptest::collection::vec(
            (0u64..4, 0u32..4, any::<bool>(), proptest::option::of(0u64..50), proptest::option::of(proptest::option::of(0u64..50))),
            0..60,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|(pc, set, hit, reuse, ev)| {
                    let mut r = with_reuse(rec(pc, set, hit), reuse);
                    if let (false, Some(ev)) = (hit, ev) {
                        r.evicted_address = Some(Address(7));
                        r.evicted_address_reuse_distance_numeric = ev;
                    }
                    r
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn stats_match_oracle(recs in arb_records()) {
            for s in all_pc_stats(&recs) {
                prop_assert!(approx_eq(&s, &oracle(&recs, s.pc)));
                prop_assert_eq!(s.hits + s.misses, s.accesses);
                prop_assert!((0.0..=100.0).contains(&s.miss_rate));
            }
            for s in set_stats(&recs) {
                let n = recs.iter().filter(|r| r.cache_set_id == s.set_id).count() as u64;
                let h = recs.iter().filter(|r| r.cache_set_id == s.set_id && r.evict == Outcome::Hit).count() as u64;
                prop_assert_eq!((s.accesses, s.hits), (n, h));
            }
            let a = bypass_candidates(&recs, 100);
            let mut rev = recs.clone();
            rev.reverse();
            let b = bypass_candidates(&rev, 100);
            prop_assert_eq!(
                a.iter().map(|c| c.pc).collect::<Vec<_>>(),
                b.iter().map(|c| c.pc).collect::<Vec<_>>()
            );
        }
    }
}
