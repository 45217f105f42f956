//! The built-in synthetic store: three workloads replayed under four policies.
//!
//! Everything is derived from fixed seeds, so the store (and any question
//! suite generated against it) is reproducible byte for byte.

use crate::hex::Pc;
use crate::ingest::{enrich, SymbolEntry, SymbolMap};
use crate::simulator::{self, synth, Access, CacheConfig, PolicySpec, SimError};
use crate::store::TraceStore;

pub const WORKLOADS: [&str; 3] = ["stream", "matrix", "graph"];
pub const TRACE_LEN: usize = 3000;

pub fn config() -> CacheConfig {
    CacheConfig { num_sets: 64, ways: 4, line_size_bytes: 64, history_depth: 8 }
}

pub fn policies() -> Vec<PolicySpec> {
    vec![PolicySpec::Lru, PolicySpec::Belady, PolicySpec::Random { seed: 7 }, PolicySpec::ScoredStub]
}

pub fn trace(workload: &str) -> Option<Vec<Access>> {
    let line = config().line_size_bytes;
    match workload {
        "stream" => Some(synth::stream_workload(TRACE_LEN, line, 11)),
        "matrix" => Some(synth::matrix_workload(TRACE_LEN, line, 22)),
        "graph" => Some(synth::graph_workload(TRACE_LEN, line, 33)),
        _ => None,
    }
}

fn entry(pc: u64, name: &str, asm: &[&str], code: &str) -> SymbolEntry {
    SymbolEntry {
        pc: Pc(pc),
        function_name: name.to_string(),
        assembly_code: asm.join("\n"),
        function_code: code.to_string(),
    }
}

pub fn symbols() -> SymbolMap {
    [
        entry(0x4037aa, "stream_copy", &["4037a6: mov (%rsi,%rcx,8),%rax", "4037aa: mov %rax,(%rdi,%rcx,8)", "4037ae: add $0x1,%rcx"], "for (i = 0; i < n; i++) dst[i] = src[i];"),
        entry(0x402ea8, "strided_scan", &["402ea4: lea (%rbx,%rdx,8),%rbx", "402ea8: movsd (%rbx),%xmm0", "402eac: addsd %xmm0,%xmm1"], "for (i = 0; i < n; i += 7) sum += a[i];"),
        entry(0x4037ba, "table_lookup", &["4037b6: and $0x17,%eax", "4037ba: mov (%r8,%rax,8),%rdx", "4037be: add %rdx,%r9"], "acc += table[key % 24];"),
        entry(0x401e31, "block_row_walk", &["401e2d: add $0x40,%rsi", "401e31: movapd (%rsi),%xmm2", "401e35: mulpd %xmm3,%xmm2"], "for (j = 0; j < B; j++) c += a[i][j] * b[j];"),
        entry(0x401d9b, "column_walk", &["401d97: add %r10,%rdi", "401d9b: movsd (%rdi),%xmm4", "401d9f: addsd %xmm4,%xmm5"], "for (i = 0; i < N; i++) s += m[i][k];"),
        entry(0x401dc9, "accumulate", &["401dc5: movsd -0x18(%rbp),%xmm0", "401dc9: addsd (%rax),%xmm0", "401dcd: movsd %xmm0,(%rax)"], "acc[t & 3] += v;"),
        entry(0x409270, "visit_vertex", &["40926c: mov 0x8(%rbx),%rax", "409270: mov (%rax,%rdx,8),%rcx", "409274: test %rcx,%rcx"], "v = &graph->vertices[id]; if (v->next) ..."),
        entry(0x405832, "chase_next", &["40582e: mov (%rax),%rax", "405832: mov 0x10(%rax),%rdx", "405836: test %rdx,%rdx"], "node = node->next;"),
        entry(0x409228, "read_index", &["409224: add $0x4,%r12", "409228: movslq (%r12),%rdx", "40922c: cmp %rdx,%r13"], "id = index[pos++];"),
    ]
    .into_iter()
    .collect()
}

/// Builds the full fixture store, enriched with symbol context.
pub fn store() -> Result<TraceStore, SimError> {
    let cfg = config();
    let map = symbols();
    let mut store = TraceStore::new();
    for workload in WORKLOADS {
        let t = trace(workload).expect("fixture workload exists");
        for policy in policies() {
            let mut bundle = simulator::simulate(workload, &t, &cfg, &policy)?;
            enrich(&mut bundle.records, &map);
            store.insert(bundle)?;
        }
    }
    Ok(store)
}
