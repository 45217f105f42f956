//! Trace replay producing annotated records.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hex::{Address, Pc};
use crate::record::{AccessRecord, LineRef, MissType, Outcome};

use super::config::{set_index, CacheConfig, PolicySpec};
use super::distance::{next_use_index, recency_table};
use super::SimError;

/// One raw LLC access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Access {
    pub pc: Pc,
    pub address: Address,
}

impl Access {
    pub fn new(pc: u64, address: u64) -> Self {
        Self { pc: Pc(pc), address: Address(address) }
    }
}

#[derive(Debug, Clone)]
struct Line {
    tag: u64,
    pc: Pc,
    address: Address,
    last_touch: u64,
    next_use: Option<usize>,
}

/// Fully-associative LRU of the same total capacity, used to split
/// capacity misses from conflict misses.
struct ShadowLru {
    capacity: usize,
    stamp_of: HashMap<u64, u64>,
    by_stamp: BTreeMap<u64, u64>,
}

impl ShadowLru {
    fn new(capacity: usize) -> Self {
        Self { capacity, stamp_of: HashMap::new(), by_stamp: BTreeMap::new() }
    }

    fn access(&mut self, tag: u64, stamp: u64) -> bool {
        let hit = if let Some(old) = self.stamp_of.insert(tag, stamp) {
            self.by_stamp.remove(&old);
            true
        } else {
            false
        };
        self.by_stamp.insert(stamp, tag);
        if self.stamp_of.len() > self.capacity {
            if let Some((_, victim)) = self.by_stamp.pop_first() {
                self.stamp_of.remove(&victim);
            }
        }
        hit
    }
}

/// Fixed pseudo-random score for a line, mixed with splitmix64.
fn stub_score(tag: u64) -> u64 {
    let mut z = tag.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (z ^ (z >> 31)) >> 54
}

/// Index of the highest score; ties go to the lowest way.
fn argmax(scores: &[u64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Replays `trace` and returns one annotated record per access, in order.
///
/// Context fields (function name, code, assembly) are left empty; fill them
/// with [`crate::ingest::enrich`].
pub fn simulate_records(
    trace: &[Access],
    config: &CacheConfig,
    policy: &PolicySpec,
) -> Result<Vec<AccessRecord>, SimError> {
    config.validate()?;
    policy.validate()?;
    let n = trace.len();
    let ways = config.ways as usize;
    let tags: Vec<u64> = trace.iter().map(|a| config.line_of(a.address)).collect();
    let next_abs = next_use_index(&tags);
    let recency = recency_table(&tags);

    let mut sets: Vec<Vec<Line>> = vec![Vec::with_capacity(ways); config.num_sets as usize];
    let mut history: Vec<VecDeque<LineRef>> = vec![VecDeque::new(); config.num_sets as usize];
    let mut shadow = ShadowLru::new(config.total_lines());
    let mut seen: HashSet<u64> = HashSet::new();
    let mut rng = match policy {
        PolicySpec::Random { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };

    let mut records = Vec::with_capacity(n);
    for (i, access) in trace.iter().enumerate() {
        let tag = tags[i];
        let set_id = set_index(access.address, config);
        let lines = &mut sets[set_id as usize];
        let hist = &mut history[set_id as usize];

        let scores: Vec<u64> = lines
            .iter()
            .map(|l| match policy {
                PolicySpec::Lru | PolicySpec::BypassLru { .. } => l.last_touch,
                PolicySpec::Belady => l.next_use.unwrap_or(n) as u64,
                PolicySpec::Random { .. } => {
                    u64::from(rng.as_mut().expect("random policy has an rng").gen::<u32>())
                }
                PolicySpec::ScoredStub => stub_score(l.tag),
            })
            .collect();

        let mut record = AccessRecord::new(access.pc, access.address, set_id, Outcome::Hit);
        record.current_cache_lines = lines.iter().map(|l| (l.pc, l.address)).collect();
        record.current_cache_line_addresses = lines.iter().map(|l| l.address).collect();
        record.cache_line_eviction_scores =
            lines.iter().zip(&scores).map(|(l, &s)| (l.address, s)).collect();
        record.recent_access_history = hist.iter().copied().collect();
        record.accessed_address_recency_numeric = recency[i];
        record.accessed_address_reuse_distance_numeric = next_abs[i].map(|j| (j - i) as u64);

        let shadow_hit = shadow.access(tag, i as u64);
        let first_touch = seen.insert(tag);
        let fresh = Line {
            tag,
            pc: access.pc,
            address: access.address,
            last_touch: i as u64,
            next_use: next_abs[i],
        };

        if let Some(pos) = lines.iter().position(|l| l.tag == tag) {
            lines[pos] = fresh;
            record.evict = Outcome::Hit;
            record.miss_type = MissType::None;
        } else {
            record.evict = Outcome::Miss;
            record.miss_type = if first_touch {
                MissType::Compulsory
            } else if shadow_hit {
                MissType::Conflict
            } else {
                MissType::Capacity
            };
            let bypass = matches!(policy, PolicySpec::BypassLru { bypass_pcs } if bypass_pcs.contains(&access.pc));
            if !bypass {
                if lines.len() < ways {
                    lines.push(fresh);
                } else {
                    let victim = match policy {
                        PolicySpec::Lru | PolicySpec::BypassLru { .. } => {
                            let mut v = 0;
                            for (w, s) in scores.iter().enumerate() {
                                if *s < scores[v] {
                                    v = w;
                                }
                            }
                            v
                        }
                        _ => argmax(&scores),
                    };
                    let old = std::mem::replace(&mut lines[victim], fresh);
                    record.evicted_address = Some(old.address);
                    record.evicted_address_reuse_distance_numeric =
                        old.next_use.map(|j| (j - i) as u64);
                }
            }
        }

        hist.push_back((access.pc, access.address));
        while hist.len() > config.history_depth {
            hist.pop_front();
        }
        records.push(record);
    }
    Ok(records)
}
