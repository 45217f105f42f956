//! Generates a verified question suite from a trace store: every expected
//! answer is computed from the store itself.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setscope_core::stats::{self, compare_policies, Metric, PcStats, Target};
use setscope_core::{AccessRecord, Address, Outcome, Pc, QueryFilters, TraceBundle, TraceStore};

use crate::question::{BenchQuestion, Category, Expected, Grounding, NumericUnit, Tier};

pub const DEFAULT_SEED: u64 = 2024;
/// PCs with fewer accesses make noisy rate questions.
const MIN_PC_ACCESSES: u64 = 10;
/// Comparison questions need the winner ahead by at least this much.
const MIN_MARGIN: f64 = 0.01;
const CRITERIA: [&str; 3] = ["correctness", "use of trace evidence", "clarity"];

fn grounding(b: &TraceBundle, pcs: &[Pc], addresses: &[Address]) -> Option<Grounding> {
    Some(Grounding {
        key: b.key.canonical_id(),
        filters: QueryFilters {
            workload: Some(b.key.workload().to_string()),
            policy: Some(b.key.policy().to_string()),
            pcs: pcs.to_vec(),
            addresses: addresses.to_vec(),
            ..QueryFilters::default()
        },
    })
}

fn tg(id: String, category: Category, text: String, expected: Expected, grounding: Option<Grounding>) -> BenchQuestion {
    BenchQuestion { id, tier: Tier::TG, category, text, expected, grounding }
}

fn ara(id: String, category: Category, text: String, reference: String, grounding: Option<Grounding>) -> BenchQuestion {
    BenchQuestion {
        id,
        tier: Tier::ARA,
        category,
        text,
        expected: Expected::Rubric { reference, criteria: CRITERIA.iter().map(|s| s.to_string()).collect() },
        grounding,
    }
}

/// Records whose (PC, address) pair has a single outcome across the bundle,
/// so the hit/miss label is unambiguous.
fn unambiguous_tuples(b: &TraceBundle) -> Vec<&AccessRecord> {
    let mut seen: BTreeMap<(Pc, Address), BTreeSet<Outcome>> = BTreeMap::new();
    for r in &b.records {
        seen.entry((r.program_counter, r.memory_address)).or_default().insert(r.evict);
    }
    let mut first = BTreeSet::new();
    b.records
        .iter()
        .filter(|r| seen[&(r.program_counter, r.memory_address)].len() == 1)
        .filter(|r| first.insert((r.program_counter, r.memory_address)))
        .collect()
}

fn busy_pcs(b: &TraceBundle) -> Vec<PcStats> {
    stats::all_pc_stats(&b.records).into_iter().filter(|s| s.accesses >= MIN_PC_ACCESSES).collect()
}

fn policy_labels(store: &TraceStore) -> Vec<String> {
    store.policies()
}

fn hit_miss(store: &TraceStore, rng: &mut ChaCha8Rng, out: &mut Vec<BenchQuestion>) {
    let bundles: Vec<&TraceBundle> = store.bundles().collect();
    let labels = vec!["Cache Hit".to_string(), "Cache Miss".to_string()];
    let mut used = BTreeSet::new();
    let mut made = 0;
    for attempt in 0..bundles.len() * 32 {
        if made == Category::HitMiss.reference_count() {
            break;
        }
        let b = bundles[attempt % bundles.len()];
        let want = if made % 2 == 0 { Outcome::Miss } else { Outcome::Hit };
        let pool: Vec<&AccessRecord> = unambiguous_tuples(b).into_iter().filter(|r| r.evict == want).collect();
        let Some(r) = pool.choose(rng) else { continue };
        if !used.insert((b.key.canonical_id(), r.program_counter, r.memory_address)) {
            continue;
        }
        made += 1;
        let (w, p) = (b.key.workload(), b.key.policy());
        out.push(tg(
            format!("hm-{made:02}"),
            Category::HitMiss,
            format!(
                "Does the memory access with PC {} and address {} result in a cache hit or cache miss for the {w} workload and {p} replacement policy?",
                r.program_counter, r.memory_address
            ),
            Expected::Label { allowed: vec![r.evict.to_string()], alternatives: labels.clone() },
            grounding(b, &[r.program_counter], &[r.memory_address]),
        ));
    }
}

fn pick_pc<'a>(rng: &mut ChaCha8Rng, pcs: &'a [PcStats], used: &mut BTreeSet<(String, Pc)>, id: &str) -> Option<&'a PcStats> {
    let mut order: Vec<&PcStats> = pcs.iter().collect();
    order.shuffle(rng);
    order.into_iter().find(|s| used.insert((id.to_string(), s.pc)))
}

/// Builds question text, expected value and unit for the i-th question on a PC.
type NumericMaker = dyn Fn(usize, &TraceBundle, &PcStats) -> Option<(String, f64, NumericUnit)>;

fn per_pc_numeric(
    store: &TraceStore,
    rng: &mut ChaCha8Rng,
    category: Category,
    prefix: &str,
    n: usize,
    make: &NumericMaker,
    out: &mut Vec<BenchQuestion>,
) {
    let bundles: Vec<&TraceBundle> = store.bundles().collect();
    let mut used = BTreeSet::new();
    let mut made = 0;
    // bounded: each bundle offers finitely many PCs
    for attempt in 0..bundles.len() * 64 {
        if made == n {
            break;
        }
        let b = bundles[(attempt * 5 + made) % bundles.len()];
        let pcs = busy_pcs(b);
        let Some(s) = pick_pc(rng, &pcs, &mut used, &format!("{}{made}", b.key.canonical_id())) else { continue };
        let Some((text, value, unit)) = make(made, b, s) else { continue };
        made += 1;
        out.push(tg(
            format!("{prefix}-{made:02}"),
            category,
            text,
            Expected::Numeric { value, unit, tolerance: None },
            grounding(b, &[s.pc], &[]),
        ));
    }
}

fn miss_rate(store: &TraceStore, rng: &mut ChaCha8Rng, out: &mut Vec<BenchQuestion>) {
    per_pc_numeric(store, rng, Category::MissRate, "mr", 8, &|_, b, s| {
        Some((
            format!("What is the miss rate for PC {} in {} with {}?", s.pc, b.key.workload(), b.key.policy()),
            s.miss_rate,
            NumericUnit::Percent,
        ))
    }, out);
    let bundles: Vec<&TraceBundle> = store.bundles().collect();
    for (k, b) in [bundles[1], bundles[bundles.len() - 2]].into_iter().enumerate() {
        let meta = setscope_core::simulator::parse_metadata(&b.metadata).expect("store metadata parses");
        out.push(tg(
            format!("mr-{:02}", 9 + k),
            Category::MissRate,
            format!("What is the overall miss rate of the {} workload under {}?", b.key.workload(), b.key.policy()),
            Expected::Numeric { value: meta.miss_rate, unit: NumericUnit::Percent, tolerance: None },
            grounding(b, &[], &[]),
        ));
    }
}

fn comparison(store: &TraceStore, rng: &mut ChaCha8Rng, out: &mut Vec<BenchQuestion>) {
    let labels = policy_labels(store);
    let mut candidates: Vec<(String, String, Option<Pc>)> = Vec::new();
    for w in store.workloads() {
        let lru_like = store.bundles().find(|b| b.key.workload() == w).expect("workload has a bundle");
        let (mr, mr_hi, hr) = (Metric::MissRate, Metric::MissRate, Metric::HitRate);
        for (form, metric, lowest) in [("lowest miss rate", mr, true), ("highest miss rate", mr_hi, false), ("highest hit rate", hr, false)] {
            let ranking = compare_policies(store, &w, Target::Workload, metric).expect("workload exists");
            if margin_ok(&ranking, metric, lowest) {
                let best = pick(&ranking, metric, lowest);
                candidates.push((format!("Which policy has the {form} on the {w} workload?"), best, None));
            }
        }
        let mut pcs = busy_pcs(lru_like);
        pcs.shuffle(rng);
        for s in pcs {
            for (form, metric, lowest) in [("lowest miss rate", mr, true), ("highest miss rate", mr_hi, false), ("highest hit rate", hr, false)] {
                let ranking = compare_policies(store, &w, Target::Pc(s.pc), metric).expect("pc exists");
                if ranking.len() == labels.len() && margin_ok(&ranking, metric, lowest) {
                    let best = pick(&ranking, metric, lowest);
                    candidates.push((format!("Which policy has the {form} for PC {} in {w}?", s.pc), best, Some(s.pc)));
                }
            }
        }
    }
    // workload-level forms first, then PC-level ones interleaved across workloads
    let want = Category::PolicyComparison.reference_count();
    let (mut chosen, mut rest): (Vec<_>, Vec<_>) = candidates.into_iter().partition(|c| c.2.is_none());
    let spare = chosen.split_off(chosen.len().min(6));
    rest.shuffle(rng);
    rest.extend(spare);
    chosen.extend(rest.into_iter().take(want.saturating_sub(chosen.len())));
    for (i, (text, best, pc)) in chosen.into_iter().enumerate() {
        let w = store.workloads().into_iter().find(|w| text.contains(&format!(" {w}"))).expect("workload named");
        out.push(tg(
            format!("pc-{:02}", i + 1),
            Category::PolicyComparison,
            text,
            Expected::Label { allowed: vec![best], alternatives: labels.clone() },
            Some(Grounding {
                key: store.bundles().find(|b| b.key.workload() == w).expect("workload has a bundle").key.canonical_id(),
                filters: QueryFilters { workload: Some(w.clone()), pcs: pc.into_iter().collect(), ..QueryFilters::default() },
            }),
        ));
    }
}

/// The policy at the requested end of a best-first ranking.
fn pick(ranking: &[stats::PolicyRank], metric: Metric, lowest: bool) -> String {
    let best_is_low = !metric.higher_is_better();
    if lowest == best_is_low { ranking[0].policy.clone() } else { ranking[ranking.len() - 1].policy.clone() }
}

fn margin_ok(ranking: &[stats::PolicyRank], metric: Metric, lowest: bool) -> bool {
    if ranking.len() < 2 {
        return false;
    }
    let best_is_low = !metric.higher_is_better();
    let (a, b) = if lowest == best_is_low {
        (ranking[0].value, ranking[1].value)
    } else {
        (ranking[ranking.len() - 1].value, ranking[ranking.len() - 2].value)
    };
    (a - b).abs() >= MIN_MARGIN
}

fn count(store: &TraceStore, rng: &mut ChaCha8Rng, out: &mut Vec<BenchQuestion>) {
    per_pc_numeric(store, rng, Category::Count, "ct", 5, &|i, b, s| {
        let (w, p) = (b.key.workload(), b.key.policy());
        let (text, v) = match i % 3 {
            0 => (format!("How many times did PC {} appear in {w} under {p}?", s.pc), s.accesses),
            1 => (format!("How many misses did PC {} incur in {w} under {p}?", s.pc), s.misses),
            _ => (format!("How many evictions did PC {} cause in {w} under {p}?", s.pc), s.eviction_count),
        };
        Some((text, v as f64, NumericUnit::Count))
    }, out);
}

fn arithmetic(store: &TraceStore, rng: &mut ChaCha8Rng, out: &mut Vec<BenchQuestion>) {
    per_pc_numeric(store, rng, Category::Arithmetic, "ar", 10, &|i, b, s| {
        let (w, p) = (b.key.workload(), b.key.policy());
        if i % 5 < 3 {
            let v = s.mean_evicted_reuse_distance?;
            Some((format!("What is the average evicted reuse distance of PC {} for the {w} workload with {p}?", s.pc), v, NumericUnit::Distance))
        } else {
            let v = s.mean_reuse_distance?;
            Some((format!("What is the average reuse distance of PC {} for the {w} workload with {p}?", s.pc), v, NumericUnit::Distance))
        }
    }, out);
}

fn trick(store: &TraceStore, rng: &mut ChaCha8Rng, out: &mut Vec<BenchQuestion>) {
    let bundles: Vec<&TraceBundle> = store.bundles().collect();
    let mut made = 0;
    let mut used = BTreeSet::new();
    for attempt in 0..bundles.len() * 16 {
        if made == Category::Trick.reference_count() {
            break;
        }
        let b = bundles[(attempt * 7 + 3) % bundles.len()];
        let pcs: BTreeSet<Pc> = b.records.iter().map(|r| r.program_counter).collect();
        let (pc, addr, premise) = if made % 2 == 0 {
            // a real PC paired with an address only other PCs touch
            let r = b.records.choose(rng).expect("bundle has records");
            let Some(other) = b.records.iter().find(|o| o.program_counter != r.program_counter) else { continue };
            let addr = other.memory_address;
            if b.records.iter().any(|o| o.program_counter == r.program_counter && o.memory_address == addr) {
                continue;
            }
            (r.program_counter, addr, format!("PC {} never accesses address {addr} in {}", r.program_counter, b.key.canonical_id()))
        } else {
            // a PC that never executes in this workload
            let foreign: Vec<Pc> = store
                .bundles()
                .flat_map(|o| o.records.iter().map(|r| r.program_counter))
                .filter(|p| !pcs.contains(p))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let Some(&pc) = foreign.choose(rng) else { continue };
            let addr = b.records[rng.gen_range(0..b.records.len())].memory_address;
            (pc, addr, format!("PC {pc} does not execute in {}", b.key.canonical_id()))
        };
        if !used.insert((pc, addr)) {
            continue;
        }
        made += 1;
        out.push(tg(
            format!("tr-{made:02}"),
            Category::Trick,
            format!("Does PC {pc} access address {addr} in {} under {}?", b.key.workload(), b.key.policy()),
            Expected::Trick { false_premise: premise },
            grounding(b, &[pc], &[addr]),
        ));
    }
}

fn reasoning(store: &TraceStore, out: &mut Vec<BenchQuestion>) {
    let concepts = [
        ("How does increasing cache size affect miss rate? Compare increasing the number of sets with increasing the number of ways.",
         "More capacity removes capacity misses until the working set fits. Adding sets spreads lines over more indices and also cuts conflict misses for strided patterns; adding ways keeps the index bits but raises associativity, which mainly removes conflict misses at the cost of lookup latency and energy."),
        ("Why is Belady's policy optimal and why can it not be implemented in hardware?",
         "It evicts the line whose next use is furthest in the future, which minimises misses for a fixed trace. Hardware does not know future accesses, so it serves as an offline bound."),
        ("What distinguishes compulsory, capacity and conflict misses?",
         "Compulsory misses are first touches. Capacity misses would also miss in a fully associative cache of the same size. Conflict misses hit in that fully associative cache but miss because too many lines map to one set."),
        ("What does a wrong eviction mean when the evicted line has a lower reuse distance than the inserted one?",
         "The policy removed a line that would have been needed sooner than the line it kept, so an optimal policy would have chosen differently; a high share of such evictions signals a poor replacement decision."),
        ("Why can LRU perform badly on streaming access patterns?",
         "Streaming lines are used once; LRU inserts them at the most recently used position, so they push out lines with real reuse before being evicted themselves. Bypassing or inserting at low priority avoids this."),
    ];
    for (i, (q, r)) in concepts.into_iter().enumerate() {
        out.push(ara(format!("mc-{:02}", i + 1), Category::MicroarchConcepts, q.to_string(), r.to_string(), None));
    }

    let bundles: Vec<&TraceBundle> = store.bundles().collect();
    for i in 0..5 {
        let b = bundles[(i * 5 + 2) % bundles.len()];
        // a hit record, so the reference program has something to count
        let start = (i * 397 + 11) % b.records.len();
        let Some(r) = b.records[start..].iter().chain(&b.records[..start]).find(|r| r.evict == Outcome::Hit) else { continue };
        let (w, p) = (b.key.workload(), b.key.policy());
        let hits = b.records.iter().filter(|o| o.program_counter == r.program_counter && o.memory_address == r.memory_address && o.evict == Outcome::Hit).count();
        out.push(ara(
            format!("cg-{:02}", i + 1),
            Category::CodeGeneration,
            format!("Write code to compute hits for PC {} and address {} in {w} under {p}.", r.program_counter, r.memory_address),
            format!(
                "from {w}/{p} | filter program_counter = {} | filter memory_address = {} | filter is_miss = 0 | aggregate count | emit \"{{0}} hits\"\nresult: {hits} hits",
                r.program_counter, r.memory_address
            ),
            grounding(b, &[r.program_counter], &[r.memory_address]),
        ));
    }

    let workloads = store.workloads();
    for i in 0..5 {
        let w = &workloads[i % workloads.len()];
        let Some(lru) = store.get_pair(w, "lru") else { continue };
        let mut pcs = busy_pcs(lru);
        pcs.sort_by(|a, b| b.misses.cmp(&a.misses).then(a.pc.cmp(&b.pc)));
        let s = &pcs[(i / workloads.len()) % pcs.len().max(1)];
        let ranking = compare_policies(store, w, Target::Pc(s.pc), Metric::MissRate).unwrap_or_default();
        let listed: Vec<String> = ranking.iter().map(|r| format!("{} {:.2}%", r.policy, r.value)).collect();
        out.push(ara(
            format!("pa-{:02}", i + 1),
            Category::PolicyAnalysis,
            format!("Why does belady outperform lru on PC {} in {w}?", s.pc),
            format!(
                "Miss rates for PC {} in {w}: {}. Belady evicts the line reused furthest in the future, so lines this PC needs again soon stay resident; LRU keeps recently used lines even when their next use is distant, producing wrong evictions.",
                s.pc,
                listed.join(", ")
            ),
            Some(Grounding { key: lru.key.canonical_id(), filters: QueryFilters { workload: Some(w.clone()), pcs: vec![s.pc], ..Default::default() } }),
        ));
    }

    for (i, p) in store.policies().iter().cycle().take(5).enumerate() {
        let mut rates: Vec<(String, f64)> = workloads
            .iter()
            .filter_map(|w| {
                let b = store.get_pair(w, p)?;
                Some((w.clone(), setscope_core::simulator::parse_metadata(&b.metadata)?.miss_rate))
            })
            .collect();
        rates.sort_by(|a, b| b.1.total_cmp(&a.1));
        let listed: Vec<String> = rates.iter().map(|(w, r)| format!("{w} {r:.2}%")).collect();
        out.push(ara(
            format!("wa-{:02}", i + 1),
            Category::WorkloadAnalysis,
            if i < 4 {
                format!("Which workload has the highest cache miss rate under {p}?")
            } else {
                format!("Characterise the workloads by their miss rate under {p} and explain the ordering.")
            },
            format!("Under {p}: {}. {} has the highest miss rate.", listed.join(", "), rates.first().map_or("none", |r| r.0.as_str())),
            None,
        ));
    }

    let symbols = setscope_core::fixtures::symbols();
    let mut placed = 0;
    for b in store.bundles().filter(|b| b.key.policy() == "lru") {
        for s in busy_pcs(b) {
            if placed == 5 {
                break;
            }
            let Some(sym) = symbols.get(s.pc) else { continue };
            placed += 1;
            let adjective = if s.hit_rate() >= 50.0 { "high" } else { "low" };
            out.push(ara(
                format!("sa-{placed:02}"),
                Category::SemanticAnalysis,
                format!("Why does PC {} have a {adjective} hit rate in {} under lru? Examine the assembly context and analyze.", s.pc, b.key.workload()),
                format!(
                    "PC {} is in {} ({}); its hit rate is {:.2}% over {} accesses. Assembly:\n{}",
                    s.pc,
                    sym.function_name,
                    sym.function_code,
                    s.hit_rate(),
                    s.accesses,
                    sym.assembly_code
                ),
                grounding(b, &[s.pc], &[]),
            ));
        }
    }
}

/// The suite layout: 30/10/15/5/10/5 trace-grounded and 5 per reasoning category.
pub fn generate_suite(store: &TraceStore, seed: u64) -> Vec<BenchQuestion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if store.is_empty() {
        return out;
    }
    hit_miss(store, &mut rng, &mut out);
    miss_rate(store, &mut rng, &mut out);
    comparison(store, &mut rng, &mut out);
    count(store, &mut rng, &mut out);
    arithmetic(store, &mut rng, &mut out);
    trick(store, &mut rng, &mut out);
    reasoning(store, &mut out);
    out
}
