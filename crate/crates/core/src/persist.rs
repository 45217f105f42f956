//! On-disk store layout.
//!
//! ```text
//! <store>/
//!   <workload>_evictions_<policy>/
//!     records.jsonl     one AccessRecord per line, fixed field order
//!     metadata.txt
//!     description.txt
//! ```
//!
//! Textual recency/reuse columns are written for readers that expect them but
//! are ignored on load; they are always re-rendered from the numeric fields.
//! Unknown columns are kept in [`AccessRecord::extensions`].

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::hex::{Address, Pc};
use crate::key::{KeyError, TraceKey};
use crate::record::{AccessRecord, LineRef, MissType, Outcome};
use crate::store::{TraceBundle, TraceStore};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const METADATA_FILE: &str = "metadata.txt";
pub const DESCRIPTION_FILE: &str = "description.txt";

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: record {line} (byte offset {byte_offset}): {message}")]
    Format {
        path: PathBuf,
        line: usize,
        byte_offset: usize,
        message: String,
    },
    #[error("invalid bundle directory name: {0}")]
    Key(#[from] KeyError),
    #[error("csv export failed: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io { path: path.to_path_buf(), source }
}

#[derive(Serialize, Deserialize)]
struct RecordRow {
    program_counter: Pc,
    memory_address: Address,
    cache_set_id: u32,
    evict: Outcome,
    miss_type: MissType,
    evicted_address: Option<Address>,
    #[serde(default)]
    accessed_address_recency: Option<String>,
    #[serde(default)]
    accessed_address_reuse_distance: Option<String>,
    #[serde(default)]
    evicted_address_reuse_distance: Option<String>,
    function_name: String,
    function_code: String,
    assembly_code: String,
    current_cache_lines: Vec<LineRef>,
    recent_access_history: Vec<LineRef>,
    cache_line_eviction_scores: Vec<(Address, u64)>,
    current_cache_line_addresses: Vec<Address>,
    evicted_address_reuse_distance_numeric: Option<u64>,
    accessed_address_reuse_distance_numeric: Option<u64>,
    accessed_address_recency_numeric: Option<u64>,
    is_miss: u8,
    #[serde(flatten)]
    extensions: BTreeMap<String, serde_json::Value>,
}

impl From<&AccessRecord> for RecordRow {
    fn from(r: &AccessRecord) -> Self {
        Self {
            program_counter: r.program_counter,
            memory_address: r.memory_address,
            cache_set_id: r.cache_set_id,
            evict: r.evict,
            miss_type: r.miss_type,
            evicted_address: r.evicted_address,
            accessed_address_recency: Some(r.accessed_address_recency()),
            accessed_address_reuse_distance: Some(r.accessed_address_reuse_distance()),
            evicted_address_reuse_distance: Some(r.evicted_address_reuse_distance()),
            function_name: r.function_name.clone(),
            function_code: r.function_code.clone(),
            assembly_code: r.assembly_code.clone(),
            current_cache_lines: r.current_cache_lines.clone(),
            recent_access_history: r.recent_access_history.clone(),
            cache_line_eviction_scores: r.cache_line_eviction_scores.clone(),
            current_cache_line_addresses: r.current_cache_line_addresses.clone(),
            evicted_address_reuse_distance_numeric: r.evicted_address_reuse_distance_numeric,
            accessed_address_reuse_distance_numeric: r.accessed_address_reuse_distance_numeric,
            accessed_address_recency_numeric: r.accessed_address_recency_numeric,
            is_miss: r.is_miss(),
            extensions: r.extensions.clone(),
        }
    }
}

impl RecordRow {
    fn into_record(self) -> Result<AccessRecord, String> {
        if self.is_miss != u8::from(self.evict == Outcome::Miss) {
            return Err(format!("is_miss={} contradicts evict={}", self.is_miss, self.evict));
        }
        Ok(AccessRecord {
            program_counter: self.program_counter,
            memory_address: self.memory_address,
            cache_set_id: self.cache_set_id,
            evict: self.evict,
            miss_type: self.miss_type,
            evicted_address: self.evicted_address,
            accessed_address_recency_numeric: self.accessed_address_recency_numeric,
            accessed_address_reuse_distance_numeric: self.accessed_address_reuse_distance_numeric,
            evicted_address_reuse_distance_numeric: self.evicted_address_reuse_distance_numeric,
            function_name: self.function_name,
            function_code: self.function_code,
            assembly_code: self.assembly_code,
            current_cache_lines: self.current_cache_lines,
            recent_access_history: self.recent_access_history,
            cache_line_eviction_scores: self.cache_line_eviction_scores,
            current_cache_line_addresses: self.current_cache_line_addresses,
            extensions: self.extensions,
        })
    }
}

/// Serializes one record as a single JSON line (no trailing newline).
pub fn record_to_json(record: &AccessRecord) -> String {
    serde_json::to_string(&RecordRow::from(record)).expect("record rows always serialize")
}

pub fn record_to_value(record: &AccessRecord) -> serde_json::Value {
    serde_json::to_value(RecordRow::from(record)).expect("record rows always serialize")
}

/// Parses JSONL text into records. `path` only labels errors.
pub fn parse_records(text: &str, path: &Path) -> Result<Vec<AccessRecord>, PersistError> {
    let mut records = Vec::new();
    let mut offset = 0usize;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        let row: RecordRow = serde_json::from_str(body).map_err(|e| PersistError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            byte_offset: start + e.column().saturating_sub(1),
            message: e.to_string(),
        })?;
        let record = row.into_record().map_err(|message| PersistError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            byte_offset: start,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_bundle(bundle: &TraceBundle, dir: &Path) -> Result<(), PersistError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let records_path = dir.join(RECORDS_FILE);
    let file = fs::File::create(&records_path).map_err(io_err(&records_path))?;
    let mut out = BufWriter::new(file);
    for r in &bundle.records {
        writeln!(out, "{}", record_to_json(r)).map_err(io_err(&records_path))?;
    }
    out.flush().map_err(io_err(&records_path))?;
    let meta = dir.join(METADATA_FILE);
    fs::write(&meta, &bundle.metadata).map_err(io_err(&meta))?;
    let desc = dir.join(DESCRIPTION_FILE);
    fs::write(&desc, &bundle.description).map_err(io_err(&desc))?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<TraceBundle, PersistError> {
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();
    let key: TraceKey = name.parse()?;
    let records_path = dir.join(RECORDS_FILE);
    let text = fs::read_to_string(&records_path).map_err(io_err(&records_path))?;
    let records = parse_records(&text, &records_path)?;
    let meta = dir.join(METADATA_FILE);
    let metadata = fs::read_to_string(&meta).map_err(io_err(&meta))?;
    let desc = dir.join(DESCRIPTION_FILE);
    let description = fs::read_to_string(&desc).map_err(io_err(&desc))?;
    Ok(TraceBundle { key, records, metadata, description })
}

/// Writes every bundle to `<root>/<canonical id>/`.
pub fn save(store: &TraceStore, root: &Path) -> Result<(), PersistError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    for bundle in store.bundles() {
        save_bundle(bundle, &root.join(bundle.key.canonical_id()))?;
    }
    Ok(())
}

/// Loads every bundle directory under `root`. Entries that are not
/// directories are ignored.
pub fn load(root: &Path) -> Result<TraceStore, PersistError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut store = TraceStore::new();
    for dir in dirs {
        store.insert(load_bundle(&dir)?)?;
    }
    Ok(store)
}

fn join_lines(lines: &[LineRef]) -> String {
    lines
        .iter()
        .map(|(pc, a)| format!("{pc}:{a}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Flat CSV export; list columns are space-separated, optional fields empty.
pub fn export_csv<W: Write>(records: &[AccessRecord], out: W) -> Result<(), PersistError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "program_counter",
        "memory_address",
        "cache_set_id",
        "evict",
        "miss_type",
        "evicted_address",
        "accessed_address_recency",
        "accessed_address_reuse_distance",
        "evicted_address_reuse_distance",
        "function_name",
        "function_code",
        "assembly_code",
        "current_cache_lines",
        "recent_access_history",
        "cache_line_eviction_scores",
        "current_cache_line_addresses",
        "evicted_address_reuse_distance_numeric",
        "accessed_address_reuse_distance_numeric",
        "accessed_address_recency_numeric",
        "is_miss",
    ])?;
    let opt = |v: Option<u64>| v.map(|n| n.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.program_counter.to_string(),
            r.memory_address.to_string(),
            r.cache_set_id.to_string(),
            r.evict.to_string(),
            r.miss_type.to_string(),
            r.evicted_address.map(|a| a.to_string()).unwrap_or_default(),
            r.accessed_address_recency(),
            r.accessed_address_reuse_distance(),
            r.evicted_address_reuse_distance(),
            r.function_name.clone(),
            r.function_code.clone(),
            r.assembly_code.clone(),
            join_lines(&r.current_cache_lines),
            join_lines(&r.recent_access_history),
            r.cache_line_eviction_scores
                .iter()
                .map(|(a, s)| format!("{a}:{s}"))
                .collect::<Vec<_>>()
                .join(" "),
            r.current_cache_line_addresses
                .iter()
                .map(Address::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            opt(r.evicted_address_reuse_distance_numeric),
            opt(r.accessed_address_reuse_distance_numeric),
            opt(r.accessed_address_recency_numeric),
            r.is_miss().to_string(),
        ])?;
    }
    w.flush().map_err(|source| PersistError::Io { path: PathBuf::from("<csv>"), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AccessRecord {
        let mut r = AccessRecord::new(Pc(0x405832), Address(0x2a9e6a48d9d), 0b10110011101, Outcome::Miss);
        r.miss_type = MissType::Capacity;
        r.evicted_address = Some(Address(0x2c919839d9d));
        r.evicted_address_reuse_distance_numeric = Some(2304);
        r.accessed_address_reuse_distance_numeric = Some(3132);
        r.current_cache_lines = vec![(Pc(0x405832), Address(0x2c919839d9d))];
        r.cache_line_eviction_scores = vec![(Address(0x2c919839d9d), 180)];
        r.current_cache_line_addresses = vec![Address(0x2c919839d9d)];
        r.function_name = "mainSimpleSort".into();
        r
    }

    #[test]
    fn json_line_has_hex_and_nulls() {
        let line = record_to_json(&sample());
        assert!(line.starts_with("{\"program_counter\":\"0x405832\",\"memory_address\":\"0x2a9e6a48d9d\""));
        assert!(line.contains("\"accessed_address_recency_numeric\":null"));
        assert!(line.contains("\"evict\":\"Cache Miss\""));
        assert!(line.contains("\"accessed_address_reuse_distance\":\"needed again in 3132 accesses\""));
        let back = parse_records(&line, Path::new("x")).unwrap();
        assert_eq!(back, vec![sample()]);
    }

    #[test]
    fn unknown_columns_survive_round_trip() {
        let line = record_to_json(&sample()).replacen('{', "{\"prefetch_hint\":\"nta\",", 1);
        let back = parse_records(&line, Path::new("x")).unwrap();
        assert_eq!(back[0].extensions.get("prefetch_hint"), Some(&serde_json::json!("nta")));
        assert_eq!(back[0].extensions.len(), 1);
        let again = parse_records(&record_to_json(&back[0]), Path::new("x")).unwrap();
        assert_eq!(again, back);
    }

    #[test]
    fn fixture_store_round_trips_through_disk() {
        let store = crate::fixtures::store().unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&store, dir.path()).unwrap();
        assert!(dir.path().join("graph_evictions_belady").join(RECORDS_FILE).is_file());
        let loaded = load(dir.path()).unwrap();
        assert_eq!(loaded, store);
        let k = TraceKey::new("graph", "lru").unwrap();
        assert_eq!(loaded.slice(&k, &Default::default()).unwrap().len(), store.get(&k).unwrap().records.len());
    }

    #[test]
    fn missing_metadata_is_io_error() {
        let store = crate::fixtures::store().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let b = store.bundles().next().unwrap();
        let bdir = dir.path().join(b.key.canonical_id());
        save_bundle(b, &bdir).unwrap();
        fs::remove_file(bdir.join(METADATA_FILE)).unwrap();
        assert!(matches!(load(dir.path()), Err(PersistError::Io { .. })));
    }

    #[test]
    fn bad_directory_name_is_key_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("not-a-key")).unwrap();
        assert!(matches!(load(dir.path()), Err(PersistError::Key(_))));
    }

    #[test]
    fn truncated_line_reports_offset() {
        let a = record_to_json(&sample());
        let text = format!("{a}\n{}", &a[..a.len() / 2]);
        match parse_records(&text, Path::new("t.jsonl")) {
            Err(PersistError::Format { line, byte_offset, .. }) => {
                assert_eq!(line, 2);
                assert!(byte_offset > a.len(), "offset {byte_offset} should fall in line 2");
                assert!(byte_offset <= text.len());
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_is_miss_rejected() {
        let line = record_to_json(&sample()).replace("\"is_miss\":1", "\"is_miss\":0");
        assert!(matches!(
            parse_records(&line, Path::new("x")),
            Err(PersistError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn csv_has_header_and_row() {
        let mut buf = Vec::new();
        export_csv(&[sample()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("program_counter,memory_address"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("0x405832,0x2a9e6a48d9d,1437,Cache Miss,Capacity,0x2c919839d9d"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_record() -> impl Strategy<Value = AccessRecord> {
            (
                (any::<u64>(), any::<u64>(), any::<u32>(), any::<bool>()),
                proptest::option::of(any::<u64>()),
                proptest::option::of(0u64..1 << 40),
                proptest::option::of(0u64..1 << 40),
                proptest::collection::vec((any::<u64>(), any::<u64>()), 0..4),
                "[ -~]{0,12}",
            )
                .prop_map(|((pc, addr, set, miss), ev, reuse, rec, lines, name)| {
                    let mut r = AccessRecord::new(
                        Pc(pc),
                        Address(addr),
                        set,
                        if miss { Outcome::Miss } else { Outcome::Hit },
                    );
                    if miss {
                        r.miss_type = MissType::Conflict;
                        r.evicted_address = ev.map(Address);
                        r.evicted_address_reuse_distance_numeric = ev.and(reuse);
                    }
                    r.accessed_address_reuse_distance_numeric = reuse;
                    r.accessed_address_recency_numeric = rec;
                    r.current_cache_lines = lines.iter().map(|&(p, a)| (Pc(p), Address(a))).collect();
                    r.current_cache_line_addresses = lines.iter().map(|&(_, a)| Address(a)).collect();
                    r.cache_line_eviction_scores = lines.iter().map(|&(p, a)| (Address(a), p)).collect();
                    r.function_name = name;
                    r
                })
        }

        proptest! {
            #[test]
            fn jsonl_round_trip(records in proptest::collection::vec(arb_record(), 0..20)) {
                let text: String = records.iter().map(|r| record_to_json(r) + "\n").collect();
                prop_assert_eq!(parse_records(&text, Path::new("p")).unwrap(), records);
            }
        }
    }
}
