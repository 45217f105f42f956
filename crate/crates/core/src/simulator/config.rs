use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hex::{Address, Pc};

use super::SimError;

/// Geometry of the simulated cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub num_sets: u32,
    pub ways: u32,
    pub line_size_bytes: u64,
    /// Number of per-set `(pc, address)` tuples kept in `recent_access_history`.
    pub history_depth: usize,
}

impl Default for CacheConfig {
    /// 2 MB LLC: 2048 sets x 16 ways x 64 B.
    fn default() -> Self {
        Self { num_sets: 2048, ways: 16, line_size_bytes: 64, history_depth: 8 }
    }
}

impl CacheConfig {
    pub fn new(num_sets: u32, ways: u32, line_size_bytes: u64) -> Result<Self, SimError> {
        let cfg = Self { num_sets, ways, line_size_bytes, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_history_depth(mut self, depth: usize) -> Self {
        self.history_depth = depth;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_sets == 0 || !self.num_sets.is_power_of_two() {
            return Err(SimError::Config(format!("num_sets {} is not a power of two", self.num_sets)));
        }
        if self.ways == 0 {
            return Err(SimError::Config("ways must be at least 1".into()));
        }
        if self.line_size_bytes == 0 || !self.line_size_bytes.is_power_of_two() {
            return Err(SimError::Config(format!(
                "line size {} is not a power of two",
                self.line_size_bytes
            )));
        }
        Ok(())
    }

    pub fn offset_bits(&self) -> u32 {
        self.line_size_bytes.trailing_zeros()
    }

    pub fn total_lines(&self) -> usize {
        self.num_sets as usize * self.ways as usize
    }

    /// Line number (address with the offset bits dropped).
    pub fn line_of(&self, address: Address) -> u64 {
        address.0 >> self.offset_bits()
    }
}

/// Set index: bits `[log2(line), log2(line) + log2(sets))` of the address.
pub fn set_index(address: Address, config: &CacheConfig) -> u32 {
    (config.line_of(address) & (u64::from(config.num_sets) - 1)) as u32
}

/// Replacement policy selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicySpec {
    Lru,
    /// Offline MIN: evict the line reused farthest in the future.
    Belady,
    Random { seed: u64 },
    /// LRU that never inserts lines fetched by the listed PCs.
    BypassLru { bypass_pcs: BTreeSet<Pc> },
    /// Deterministic per-line integer scores standing in for a learned model.
    ScoredStub,
}

impl PolicySpec {
    /// Identifier used in trace keys.
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Lru => "lru",
            PolicySpec::Belady => "belady",
            PolicySpec::Random { .. } => "random",
            PolicySpec::BypassLru { .. } => "bypass_lru",
            PolicySpec::ScoredStub => "scored_stub",
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if let PolicySpec::BypassLru { bypass_pcs } = self {
            if bypass_pcs.is_empty() {
                return Err(SimError::Config("bypass policy needs at least one PC".into()));
            }
        }
        Ok(())
    }

    pub fn description(&self) -> String {
        match self {
            PolicySpec::Lru => "Policy LRU: evicts the least recently used line of the set. \
                Line score is the sequence number of its last touch; the lowest score is evicted."
                .to_string(),
            PolicySpec::Belady => "Policy Belady: offline optimal replacement that evicts the line \
                whose next use is farthest in the future. Line score is the absolute index of its next \
                use (trace length if never reused); the highest score is evicted, ties to the lowest way."
                .to_string(),
            PolicySpec::Random { seed } => format!(
                "Policy Random (seed {seed}): each line receives a pseudo-random score on every access \
                 and the highest score is evicted."
            ),
            PolicySpec::BypassLru { bypass_pcs } => format!(
                "Policy Bypass-LRU: LRU replacement, but misses issued by PCs {} are not inserted.",
                bypass_pcs.iter().map(Pc::to_string).collect::<Vec<_>>().join(", ")
            ),
            PolicySpec::ScoredStub => "Policy ScoredStub: a fixed pseudo-random score per line address \
                stands in for a learned eviction model; the highest score is evicted."
                .to_string(),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_set_id_on_line_granular_address() {
        // trace addresses are line numbers, so the set is the low 11 bits
        let cfg = CacheConfig::new(2048, 16, 1).unwrap();
        assert_eq!(set_index(Address(0x2a9e6a48d9d), &cfg), 0b10110011101);
    }

    #[test]
    fn set_bits_above_line_offset() {
        let cfg = CacheConfig::new(2048, 16, 64).unwrap();
        let addr = Address((0b10110011101 << 6) | 0x3f | (0xabc << 17));
        assert_eq!(set_index(addr, &cfg), 0b10110011101);
    }

    #[test]
    fn single_set_and_hand_extraction() {
        let one = CacheConfig::new(1, 4, 64).unwrap();
        for a in [0u64, 0x1000, 0xdead_beef, u64::MAX] {
            assert_eq!(set_index(Address(a), &one), 0);
        }
        let cfg = CacheConfig::new(16, 2, 64).unwrap();
        assert_eq!(set_index(Address(0x1000), &cfg), ((0x1000u64 >> 6) % 16) as u32);
        assert_eq!(set_index(Address(0x1000), &cfg), 0);
        assert_eq!(set_index(Address(0x10c0), &cfg), 3);
    }

    #[test]
    fn invalid_configs() {
        assert!(CacheConfig::new(0, 4, 64).is_err());
        assert!(CacheConfig::new(3, 4, 64).is_err());
        assert!(CacheConfig::new(4, 0, 64).is_err());
        assert!(CacheConfig::new(4, 4, 48).is_err());
        assert!(PolicySpec::BypassLru { bypass_pcs: BTreeSet::new() }.validate().is_err());
    }
}
