//! Symbolic record filters and trace slicing.

use serde::{Deserialize, Serialize};

use crate::hex::{Address, Pc};
use crate::record::{AccessRecord, Outcome};

/// Symbolic filters extracted from a question.
///
/// Within a list field any value may match; across fields all present
/// constraints must hold. `either` holds hex tokens whose role (PC or data
/// address) could not be decided; such a token matches either column.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFilters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pcs: Vec<Pc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub addresses: Vec<Address>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub either: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub set_ids: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

impl QueryFilters {
    /// True when at least one field constrains retrieval.
    pub fn is_anchored(&self) -> bool {
        self.workload.is_some()
            || self.policy.is_some()
            || self.has_record_constraints()
    }

    /// True when some field constrains individual records (as opposed to bundle choice).
    pub fn has_record_constraints(&self) -> bool {
        !self.pcs.is_empty()
            || !self.addresses.is_empty()
            || !self.either.is_empty()
            || !self.set_ids.is_empty()
            || self.outcome.is_some()
    }

    pub fn matches(&self, r: &AccessRecord) -> bool {
        (self.pcs.is_empty() || self.pcs.contains(&r.program_counter))
            && (self.addresses.is_empty() || self.addresses.contains(&r.memory_address))
            && (self.either.is_empty()
                || self
                    .either
                    .iter()
                    .any(|&v| v == r.program_counter.0 || v == r.memory_address.0))
            && (self.set_ids.is_empty() || self.set_ids.contains(&r.cache_set_id))
            && self.outcome.is_none_or(|o| o == r.evict)
    }

    /// One-line echo used in provenance and rendered context.
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(w) = &self.workload {
            parts.push(format!("workload={w}"));
        }
        if let Some(p) = &self.policy {
            parts.push(format!("policy={p}"));
        }
        let join = |v: Vec<String>| v.join(",");
        if !self.pcs.is_empty() {
            parts.push(format!("pc={}", join(self.pcs.iter().map(Pc::to_string).collect())));
        }
        if !self.addresses.is_empty() {
            parts.push(format!(
                "address={}",
                join(self.addresses.iter().map(Address::to_string).collect())
            ));
        }
        if !self.either.is_empty() {
            parts.push(format!(
                "pc_or_address={}",
                join(self.either.iter().map(|v| format!("{v:#x}")).collect())
            ));
        }
        if !self.set_ids.is_empty() {
            parts.push(format!("set={}", join(self.set_ids.iter().map(u32::to_string).collect())));
        }
        if let Some(o) = self.outcome {
            parts.push(format!("outcome={o}"));
        }
        if parts.is_empty() {
            "none".to_string()
        } else {
            parts.join(" ")
        }
    }
}

/// Records matching every present filter field, in trace order.
pub fn slice<'a>(records: &'a [AccessRecord], filters: &QueryFilters) -> Vec<&'a AccessRecord> {
    records.iter().filter(|r| filters.matches(r)).collect()
}

/// Owned variant of [`slice`].
pub fn slice_owned(records: &[AccessRecord], filters: &QueryFilters) -> Vec<AccessRecord> {
    records.iter().filter(|r| filters.matches(r)).cloned().collect()
}
