//! Trace text files and symbol sidecars.
//!
//! Trace files hold one access per line, `<pc_hex> <address_hex>`; blank lines
//! and `#` comments are skipped. The symbol sidecar is JSON Lines:
//!
//! ```text
//! {"pc": "0x409270", "function_name": "...", "assembly_code": "...", "function_code": "..."}
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::hex::{parse_hex_u64, Pc};
use crate::record::AccessRecord;
use crate::simulator::Access;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn parse_trace_str(text: &str) -> Result<Vec<Access>, IngestError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [pc, addr] = fields.as_slice() else {
            return Err(IngestError::Parse {
                line: i + 1,
                message: format!("expected `<pc> <address>`, found {} fields", fields.len()),
            });
        };
        let parse = |s: &str| {
            parse_hex_u64(s).map_err(|e| IngestError::Parse { line: i + 1, message: e.to_string() })
        };
        out.push(Access::new(parse(pc)?, parse(addr)?));
    }
    Ok(out)
}

pub fn parse_trace_file(path: &Path) -> Result<Vec<Access>, IngestError> {
    let text = fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    parse_trace_str(&text)
}

/// Renders accesses in the trace file format.
pub fn render_trace(trace: &[Access]) -> String {
    trace.iter().map(|a| format!("{} {}\n", a.pc, a.address)).collect()
}

/// Source-level context for one PC.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub pc: Pc,
    #[serde(default)]
    pub function_name: String,
    #[serde(default)]
    pub assembly_code: String,
    #[serde(default)]
    pub function_code: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolMap {
    entries: HashMap<Pc, SymbolEntry>,
}

/// Non-fatal findings while loading a sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    DuplicatePc { pc: Pc, line: usize },
}

impl SymbolMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an entry; a later entry for the same PC replaces the earlier one.
    pub fn insert(&mut self, entry: SymbolEntry) -> Option<SymbolEntry> {
        self.entries.insert(entry.pc, entry)
    }

    pub fn get(&self, pc: Pc) -> Option<&SymbolEntry> {
        self.entries.get(&pc)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_jsonl(text: &str) -> Result<(Self, Vec<IngestWarning>), IngestError> {
        let mut map = Self::new();
        let mut warnings = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: SymbolEntry = serde_json::from_str(line)
                .map_err(|e| IngestError::Parse { line: i + 1, message: e.to_string() })?;
            let pc = entry.pc;
            if map.insert(entry).is_some() {
                log::warn!("symbol sidecar line {}: duplicate entry for PC {pc}, keeping the later one", i + 1);
                warnings.push(IngestWarning::DuplicatePc { pc, line: i + 1 });
            }
        }
        Ok((map, warnings))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<IngestWarning>), IngestError> {
        let text = fs::read_to_string(path)
            .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        Self::from_jsonl(&text)
    }

    /// Entries sorted by PC, one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut entries: Vec<&SymbolEntry> = self.entries.values().collect();
        entries.sort_by_key(|e| e.pc);
        entries
            .into_iter()
            .map(|e| serde_json::to_string(e).expect("symbol entries serialize") + "\n")
            .collect()
    }
}

impl FromIterator<SymbolEntry> for SymbolMap {
    fn from_iter<I: IntoIterator<Item = SymbolEntry>>(iter: I) -> Self {
        let mut map = Self::new();
        for e in iter {
            map.insert(e);
        }
        map
    }
}

/// Fills the three source-context fields from `map`; PCs missing from the map
/// get empty strings.
pub fn enrich(records: &mut [AccessRecord], map: &SymbolMap) {
    for r in records {
        match map.get(r.program_counter) {
            Some(e) => {
                r.function_name.clone_from(&e.function_name);
                r.assembly_code.clone_from(&e.assembly_code);
                r.function_code.clone_from(&e.function_code);
            }
            None => {
                r.function_name.clear();
                r.assembly_code.clear();
                r.function_code.clear();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hex::Address;
    use crate::record::Outcome;

    #[test]
    fn parses_trace_lines() {
        let t = parse_trace_str("0x400512 0x2a9e6a48d00\n").unwrap();
        assert_eq!(t, vec![Access::new(0x400512, 0x2a9e6a48d00)]);
        assert!(parse_trace_str("").unwrap().is_empty());
        let t = parse_trace_str("# header\n\n0x1 0x2  # trailing\n  0x3 0x4\n").unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn reports_bad_lines() {
        match parse_trace_str("0xZZ 0x1") {
            Err(IngestError::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_trace_str("0x1 0x2\n0x1 0x2 0x3") {
            Err(IngestError::Parse { line: 2, message }) => assert!(message.contains("3 fields")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_render_round_trip() {
        let t = vec![Access::new(0x401e31, 0x35e798a637f), Access::new(0x1, 0x0)];
        assert_eq!(parse_trace_str(&render_trace(&t)).unwrap(), t);
    }

    const SIDECAR: &str = r#"{"pc": "0x409270", "function_name": "_ZN7way2obj11createwayarERP6pointtRi", "assembly_code": "409270: mov (%rax),%rdx", "function_code": "ways[i] = p;"}
{"pc": "0x405832", "function_name": "mainSimpleSort", "assembly_code": "405832: jne 4032d7", "function_code": ""}
{"pc": "0x409270", "function_name": "createwayar_v2", "assembly_code": "", "function_code": ""}
"#;

    #[test]
    fn duplicate_pc_last_wins_with_warning() {
        let (map, warnings) = SymbolMap::from_jsonl(SIDECAR).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.get(Pc(0x409270)).unwrap().function_name, "createwayar_v2");
        assert_eq!(warnings, vec![IngestWarning::DuplicatePc { pc: Pc(0x409270), line: 3 }]);
        let reparsed = SymbolMap::from_jsonl(&map.to_jsonl()).unwrap();
        assert_eq!(reparsed.0, map);
        assert!(reparsed.1.is_empty());
    }

    #[test]
    fn enrich_fills_known_pcs() {
        let (map, _) = SymbolMap::from_jsonl(SIDECAR.lines().next().unwrap()).unwrap();
        let mut recs = vec![
            AccessRecord::new(Pc(0x409270), Address(0x2bfd401c63f), 0, Outcome::Miss),
            AccessRecord::new(Pc(0x1234), Address(0x1), 0, Outcome::Hit),
        ];
        enrich(&mut recs, &map);
        assert_eq!(recs[0].function_name, "_ZN7way2obj11createwayarERP6pointtRi");
        assert_eq!(recs[1].function_name, "");
        let once = recs.clone();
        enrich(&mut recs, &map);
        assert_eq!(recs, once);
        enrich(&mut recs, &SymbolMap::new());
        assert!(recs.iter().all(|r| r.function_name.is_empty() && r.assembly_code.is_empty()));
    }

    #[test]
    fn malformed_sidecar() {
        assert!(matches!(SymbolMap::from_jsonl("{\"pc\": 12}"), Err(IngestError::Parse { line: 1, .. })));
    }
}
