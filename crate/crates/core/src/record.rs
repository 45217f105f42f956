//! The per-access record schema.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hex::{Address, Pc};

/// Access outcome. Serialized with the trace vocabulary `Cache Hit` / `Cache Miss`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "Cache Hit")]
    Hit,
    #[serde(rename = "Cache Miss")]
    Miss,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Hit => "Cache Hit",
            Outcome::Miss => "Cache Miss",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub enum MissType {
    #[default]
    None,
    Compulsory,
    Capacity,
    Conflict,
}

impl MissType {
    pub fn as_str(self) -> &'static str {
        match self {
            MissType::None => "None",
            MissType::Compulsory => "Compulsory",
            MissType::Capacity => "Capacity",
            MissType::Conflict => "Conflict",
        }
    }
}

impl fmt::Display for MissType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A resident or recently accessed line, as `(pc, address)`.
pub type LineRef = (Pc, Address);

/// One annotated LLC access.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessRecord {
    pub program_counter: Pc,
    pub memory_address: Address,
    pub cache_set_id: u32,
    pub evict: Outcome,
    pub miss_type: MissType,
    pub evicted_address: Option<Address>,
    /// Intervening accesses since the previous touch of this address; `None` on first touch.
    pub accessed_address_recency_numeric: Option<u64>,
    /// Accesses until this address is touched again; `None` if never reused.
    pub accessed_address_reuse_distance_numeric: Option<u64>,
    pub evicted_address_reuse_distance_numeric: Option<u64>,
    pub function_name: String,
    pub function_code: String,
    pub assembly_code: String,
    pub current_cache_lines: Vec<LineRef>,
    pub recent_access_history: Vec<LineRef>,
    pub cache_line_eviction_scores: Vec<(Address, u64)>,
    pub current_cache_line_addresses: Vec<Address>,
    /// Columns this build does not know about, carried through load/save untouched.
    pub extensions: BTreeMap<String, serde_json::Value>,
}

impl AccessRecord {
    pub fn is_miss(&self) -> u8 {
        u8::from(self.evict == Outcome::Miss)
    }

    pub fn accessed_address_recency(&self) -> String {
        recency_text(self.accessed_address_recency_numeric)
    }

    pub fn accessed_address_reuse_distance(&self) -> String {
        reuse_text(self.accessed_address_reuse_distance_numeric)
    }

    pub fn evicted_address_reuse_distance(&self) -> String {
        match self.evicted_address {
            Some(_) => reuse_text(self.evicted_address_reuse_distance_numeric),
            None => "no eviction".to_string(),
        }
    }

    /// A bare record with empty context fields, for builders and tests.
    pub fn new(pc: Pc, address: Address, set: u32, evict: Outcome) -> Self {
        Self {
            program_counter: pc,
            memory_address: address,
            cache_set_id: set,
            evict,
            miss_type: if evict == Outcome::Miss {
                MissType::Compulsory
            } else {
                MissType::None
            },
            evicted_address: None,
            accessed_address_recency_numeric: None,
            accessed_address_reuse_distance_numeric: None,
            evicted_address_reuse_distance_numeric: None,
            function_name: String::new(),
            function_code: String::new(),
            assembly_code: String::new(),
            current_cache_lines: Vec::new(),
            recent_access_history: Vec::new(),
            cache_line_eviction_scores: Vec::new(),
            current_cache_line_addresses: Vec::new(),
            extensions: BTreeMap::new(),
        }
    }

    /// Checks the record-local schema invariants.
    pub fn check(&self, ways: Option<usize>, history_depth: Option<usize>) -> Result<(), String> {
        if (self.evict == Outcome::Hit) != (self.miss_type == MissType::None) {
            return Err(format!(
                "miss_type {} inconsistent with {}",
                self.miss_type, self.evict
            ));
        }
        if self.evicted_address.is_some() {
            if self.evict != Outcome::Miss {
                return Err("evicted_address present on a hit".into());
            }
            if let Some(w) = ways {
                if self.current_cache_lines.len() != w {
                    return Err("eviction from a set that was not full".into());
                }
            }
        }
        if let Some(w) = ways {
            if self.current_cache_lines.len() > w {
                return Err(format!("{} resident lines exceed {w} ways", self.current_cache_lines.len()));
            }
        }
        if let Some(h) = history_depth {
            if self.recent_access_history.len() > h {
                return Err("access history longer than configured depth".into());
            }
        }
        Ok(())
    }
}

pub fn reuse_text(distance: Option<u64>) -> String {
    match distance {
        Some(n) => format!("needed again in {n} accesses"),
        None => "never accessed again".to_string(),
    }
}

pub fn recency_text(recency: Option<u64>) -> String {
    match recency {
        Some(n) => format!("last accessed {n} accesses ago"),
        None => "first access".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_views_follow_numeric_fields() {
        let mut r = AccessRecord::new(Pc(0x401dc9), Address(0x47ea85d37f), 3, Outcome::Miss);
        r.accessed_address_reuse_distance_numeric = Some(3132);
        r.evicted_address = Some(Address(0x19e02d19b7f));
        r.evicted_address_reuse_distance_numeric = Some(2304);
        assert_eq!(r.accessed_address_reuse_distance(), "needed again in 3132 accesses");
        assert_eq!(r.evicted_address_reuse_distance(), "needed again in 2304 accesses");
        assert_eq!(r.accessed_address_recency(), "first access");
        r.accessed_address_recency_numeric = Some(7);
        assert_eq!(r.accessed_address_recency(), "last accessed 7 accesses ago");
    }

    #[test]
    fn check_catches_inconsistent_outcome() {
        let mut r = AccessRecord::new(Pc(1), Address(2), 0, Outcome::Hit);
        assert!(r.check(Some(2), Some(8)).is_ok());
        r.miss_type = MissType::Conflict;
        assert!(r.check(None, None).is_err());
        let mut r = AccessRecord::new(Pc(1), Address(2), 0, Outcome::Hit);
        r.evicted_address = Some(Address(3));
        assert!(r.check(None, None).is_err());
    }
}
