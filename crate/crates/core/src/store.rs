//! In-memory keyed store of trace bundles.

use std::collections::{BTreeMap, HashMap};

use crate::filter::{self, QueryFilters};
use crate::hex::{Address, Pc};
use crate::key::{KeyError, TraceKey};
use crate::record::AccessRecord;
use crate::simulator::summary::{self, TraceSummary};

/// One workload replayed under one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBundle {
    pub key: TraceKey,
    /// Records in access order.
    pub records: Vec<AccessRecord>,
    /// Whole-trace summary string.
    pub metadata: String,
    /// Human-readable workload and policy summary.
    pub description: String,
}

impl TraceBundle {
    /// Checks that the metadata string agrees with the records.
    pub fn verify(&self) -> Result<TraceSummary, String> {
        let embedded = summary::parse_metadata(&self.metadata)
            .ok_or_else(|| format!("{}: metadata does not parse as a summary", self.key))?;
        let recomputed = summary::summarize(&self.records).map_err(|e| e.to_string())?;
        if embedded.total_accesses != recomputed.total_accesses
            || embedded.total_misses != recomputed.total_misses
            || embedded.total_evictions != recomputed.total_evictions
            || embedded.wrong_evictions != recomputed.wrong_evictions
        {
            return Err(format!(
                "{}: metadata counters {:?} differ from records {:?}",
                self.key,
                (embedded.total_accesses, embedded.total_misses, embedded.total_evictions, embedded.wrong_evictions),
                (recomputed.total_accesses, recomputed.total_misses, recomputed.total_evictions, recomputed.wrong_evictions),
            ));
        }
        Ok(recomputed)
    }

    /// The workload part of the description (lines before the first `Policy` line).
    pub fn workload_description(&self) -> String {
        split_description(&self.description).0
    }

    pub fn policy_description(&self) -> String {
        split_description(&self.description).1
    }
}

fn split_description(text: &str) -> (String, String) {
    let mut workload = Vec::new();
    let mut policy = Vec::new();
    let mut in_policy = false;
    for line in text.lines() {
        if line.trim_start().starts_with("Policy") {
            in_policy = true;
        } else if line.trim_start().starts_with("Workload") {
            in_policy = false;
        }
        if in_policy {
            policy.push(line);
        } else {
            workload.push(line);
        }
    }
    (workload.join("\n"), policy.join("\n"))
}

/// Row positions per `(pc, address)` pair of one bundle.
type PairIndex = HashMap<(Pc, Address), Vec<usize>>;

fn build_index(records: &[AccessRecord]) -> PairIndex {
    let mut index: PairIndex = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        index
            .entry((r.program_counter, r.memory_address))
            .or_default()
            .push(i);
    }
    index
}

/// Keyed collection of bundles. Immutable once built; writers go through
/// [`TraceStore::put_bundle`] which yields the next version.
#[derive(Debug, Clone, Default)]
pub struct TraceStore {
    bundles: BTreeMap<TraceKey, TraceBundle>,
    index: BTreeMap<TraceKey, PairIndex>,
}

impl PartialEq for TraceStore {
    fn eq(&self, other: &Self) -> bool {
        self.bundles == other.bundles
    }
}

impl TraceStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `bundle` under its canonical key, replacing any previous bundle.
    pub fn put_bundle(mut self, bundle: TraceBundle) -> Result<Self, KeyError> {
        self.insert(bundle)?;
        Ok(self)
    }

    pub fn insert(&mut self, bundle: TraceBundle) -> Result<Option<TraceBundle>, KeyError> {
        // keys built outside TraceKey::new are impossible, but a bundle may have
        // been deserialized by a foreign tool; re-validate.
        let key = TraceKey::new(bundle.key.workload(), bundle.key.policy())?;
        self.index.insert(key.clone(), build_index(&bundle.records));
        Ok(self.bundles.insert(key, bundle))
    }

    pub fn len(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn get(&self, key: &TraceKey) -> Option<&TraceBundle> {
        self.bundles.get(key)
    }

    pub fn get_by_id(&self, canonical_id: &str) -> Option<&TraceBundle> {
        canonical_id.parse::<TraceKey>().ok().and_then(|k| self.bundles.get(&k))
    }

    pub fn get_pair(&self, workload: &str, policy: &str) -> Option<&TraceBundle> {
        TraceKey::new(workload, policy).ok().and_then(|k| self.bundles.get(&k))
    }

    pub fn keys(&self) -> impl Iterator<Item = &TraceKey> {
        self.bundles.keys()
    }

    pub fn bundles(&self) -> impl Iterator<Item = &TraceBundle> {
        self.bundles.values()
    }

    /// Distinct workload names, sorted.
    pub fn workloads(&self) -> Vec<String> {
        let mut v: Vec<String> = self.bundles.keys().map(|k| k.workload().to_string()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn policies(&self) -> Vec<String> {
        let mut v: Vec<String> = self.bundles.keys().map(|k| k.policy().to_string()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Records of one bundle matching `filters`. Uses the `(pc, address)` index
    /// when the filters pin exactly one pair.
    pub fn slice<'a>(&'a self, key: &TraceKey, filters: &QueryFilters) -> Option<Vec<&'a AccessRecord>> {
        let bundle = self.bundles.get(key)?;
        if let ([pc], [addr]) = (filters.pcs.as_slice(), filters.addresses.as_slice()) {
            if let Some(index) = self.index.get(key) {
                let rows = index.get(&(*pc, *addr)).map(Vec::as_slice).unwrap_or(&[]);
                return Some(
                    rows.iter()
                        .map(|&i| &bundle.records[i])
                        .filter(|r| filters.matches(r))
                        .collect(),
                );
            }
        }
        Some(filter::slice(&bundle.records, filters))
    }
}
