//! Trace-driven set-associative cache simulation.
//!
//! [`simulate`] replays `(pc, address)` accesses under one [`PolicySpec`] and
//! produces a [`TraceBundle`]: one [`AccessRecord`] per access with the set
//! snapshot, per-set access history, policy scores, forward reuse and recency
//! annotations, a miss classification, and the whole-trace metadata string.
//!
//! Reuse distances are index deltas over the whole trace at line granularity:
//! a forward distance of `N` means the line is touched again `N` accesses
//! later. Recency counts the accesses in between the previous touch and this one.

pub mod config;
pub mod distance;
pub mod engine;
pub mod summary;
pub mod synth;

use std::collections::HashSet;

pub use config::{set_index, CacheConfig, PolicySpec};
pub use distance::{next_use_table, recency_table};
pub use engine::{simulate_records, Access};
pub use summary::{is_wrong_eviction, parse_metadata, render_metadata, summarize, TraceSummary};

use crate::key::{KeyError, TraceKey};
use crate::record::AccessRecord;
use crate::store::TraceBundle;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trace is empty")]
    EmptyTrace,
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// Rendering switches for the metadata string.
#[derive(Debug, Clone, Copy, Default)]
pub struct RenderOptions {
    /// Report compulsory misses inside the capacity share.
    pub fold_compulsory: bool,
}

/// Workload half of a bundle description.
pub fn describe_workload(workload: &str, trace: &[Access], config: &CacheConfig) -> String {
    let lines: HashSet<u64> = trace.iter().map(|a| config.line_of(a.address)).collect();
    let pcs: HashSet<_> = trace.iter().map(|a| a.pc).collect();
    let bytes = config.total_lines() as u64 * config.line_size_bytes;
    let size = if bytes >= 1 << 20 && bytes.is_multiple_of(1 << 20) {
        format!("{} MB", bytes >> 20)
    } else if bytes >= 1 << 10 && bytes.is_multiple_of(1 << 10) {
        format!("{} KB", bytes >> 10)
    } else {
        format!("{bytes} B")
    };
    format!(
        "Workload {workload}: {} LLC accesses to {} distinct lines from {} distinct PCs. \
         Cache: {size}, {} sets, {} ways, {} B lines.",
        trace.len(),
        lines.len(),
        pcs.len(),
        config.num_sets,
        config.ways,
        config.line_size_bytes,
    )
}

/// Replays `trace` and packages the result under `<workload>_evictions_<policy>`.
pub fn simulate(
    workload: &str,
    trace: &[Access],
    config: &CacheConfig,
    policy: &PolicySpec,
) -> Result<TraceBundle, SimError> {
    simulate_with(workload, trace, config, policy, RenderOptions::default())
}

pub fn simulate_with(
    workload: &str,
    trace: &[Access],
    config: &CacheConfig,
    policy: &PolicySpec,
    options: RenderOptions,
) -> Result<TraceBundle, SimError> {
    let key = TraceKey::new(workload, policy.name())?;
    let records = simulate_records(trace, config, policy)?;
    bundle_from_records(key, records, trace, config, policy, options)
}

pub fn bundle_from_records(
    key: TraceKey,
    records: Vec<AccessRecord>,
    trace: &[Access],
    config: &CacheConfig,
    policy: &PolicySpec,
    options: RenderOptions,
) -> Result<TraceBundle, SimError> {
    let summary = summarize(&records)?;
    let metadata = render_metadata(&summary, options.fold_compulsory);
    let description = format!(
        "{}\n{}",
        describe_workload(key.workload(), trace, config),
        policy.description()
    );
    Ok(TraceBundle { key, records, metadata, description })
}
