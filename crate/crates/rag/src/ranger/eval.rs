//! Total evaluator for checked query programs. Reads only the store.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use setscope_core::{AccessRecord, TraceStore};

use super::ast::*;
use super::parse::{check_program, compile_regex, template_parts, Part};
use super::RangerError;

/// Rows listed by `{rows}` before the rest are summarized.
const MAX_LISTED: usize = 50;

/// A scalar cell of a record.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Null,
    Int(u64),
    Hex(u64),
    Str(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Null => "null".into(),
            Value::Int(v) => v.to_string(),
            Value::Hex(v) => format!("{v:#x}"),
            Value::Str(s) => s.clone(),
        }
    }

    fn as_u64(&self) -> Option<u64> {
        match self {
            Value::Int(v) | Value::Hex(v) => Some(*v),
            _ => None,
        }
    }
}

pub fn column_value(r: &AccessRecord, c: Column) -> Value {
    let hex = |v: u64| Value::Hex(v);
    let int = |v: Option<u64>| v.map_or(Value::Null, Value::Int);
    match c {
        Column::ProgramCounter => hex(r.program_counter.0),
        Column::MemoryAddress => hex(r.memory_address.0),
        Column::CacheSetId => Value::Int(u64::from(r.cache_set_id)),
        Column::Evict => Value::Str(r.evict.to_string()),
        Column::MissType => Value::Str(r.miss_type.to_string()),
        Column::EvictedAddress => r.evicted_address.map_or(Value::Null, |a| hex(a.0)),
        Column::AccessedAddressRecency => Value::Str(r.accessed_address_recency()),
        Column::AccessedAddressReuseDistance => Value::Str(r.accessed_address_reuse_distance()),
        Column::EvictedAddressReuseDistance => Value::Str(r.evicted_address_reuse_distance()),
        Column::FunctionName => Value::Str(r.function_name.clone()),
        Column::FunctionCode => Value::Str(r.function_code.clone()),
        Column::AssemblyCode => Value::Str(r.assembly_code.clone()),
        Column::AccessedAddressRecencyNumeric => int(r.accessed_address_recency_numeric),
        Column::AccessedAddressReuseDistanceNumeric => int(r.accessed_address_reuse_distance_numeric),
        Column::EvictedAddressReuseDistanceNumeric => int(r.evicted_address_reuse_distance_numeric),
        Column::IsMiss => Value::Int(u64::from(r.is_miss())),
        // list columns never reach evaluation; the checker rejects them
        Column::CurrentCacheLines
        | Column::RecentAccessHistory
        | Column::CacheLineEvictionScores
        | Column::CurrentCacheLineAddresses => Value::Null,
    }
}

fn compare(v: &Value, op: CmpOp, lit: &Literal) -> bool {
    let ord = match (v, lit) {
        (Value::Null, Literal::Null) => return op == CmpOp::Eq,
        (_, Literal::Null) => return op == CmpOp::Ne,
        // comparisons against a missing value are false
        (Value::Null, _) => return false,
        (Value::Int(a) | Value::Hex(a), Literal::Int(b) | Literal::Hex(b)) => a.cmp(b),
        (Value::Int(a) | Value::Hex(a), Literal::Float(b)) => (*a as f64).total_cmp(b),
        (Value::Str(a), Literal::Str(b)) => a.trim().to_ascii_lowercase().cmp(&b.trim().to_ascii_lowercase()),
        _ => return false,
    };
    match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }
}

/// Output of one aggregate function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agg {
    Null,
    Int(u64),
    Hex(u64),
    Float(f64),
}

impl Agg {
    /// Integers as-is, hex with `0x`, reals to two decimals.
    pub fn render(&self) -> String {
        match self {
            Agg::Null => "n/a".into(),
            Agg::Int(v) => v.to_string(),
            Agg::Hex(v) => format!("{v:#x}"),
            Agg::Float(v) => format!("{v:.2}"),
        }
    }

    fn sort_key(&self) -> Option<f64> {
        match self {
            Agg::Null => None,
            Agg::Int(v) | Agg::Hex(v) => Some(*v as f64),
            Agg::Float(v) => Some(*v),
        }
    }
}

fn aggregate(rows: &[&AccessRecord], a: &Aggregate) -> Agg {
    let Some(col) = a.column else {
        return Agg::Int(rows.len() as u64);
    };
    let vals: Vec<Value> = rows.iter().map(|r| column_value(r, col)).filter(|v| *v != Value::Null).collect();
    let nums: Vec<u64> = vals.iter().filter_map(Value::as_u64).collect();
    let wrap = |v: u64| if col.kind() == ColumnKind::Hex { Agg::Hex(v) } else { Agg::Int(v) };
    let mean = || nums.iter().map(|&x| x as f64).sum::<f64>() / nums.len() as f64;
    match a.func {
        AggFn::Count => Agg::Int(vals.len() as u64),
        AggFn::Sum => Agg::Int(nums.iter().fold(0u64, |s, &x| s.saturating_add(x))),
        AggFn::Mean if nums.is_empty() => Agg::Null,
        AggFn::Mean => Agg::Float(mean()),
        AggFn::Std if nums.len() < 2 => Agg::Null,
        AggFn::Std => {
            let m = mean();
            let var = nums.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / (nums.len() - 1) as f64;
            Agg::Float(var.sqrt())
        }
        AggFn::Min => nums.iter().min().map_or(Agg::Null, |&v| wrap(v)),
        AggFn::Max => nums.iter().max().map_or(Agg::Null, |&v| wrap(v)),
        AggFn::RatePct if nums.is_empty() => Agg::Null,
        AggFn::RatePct => Agg::Float(100.0 * nums.iter().filter(|&&x| x != 0).count() as f64 / nums.len() as f64),
    }
}

enum State<'a> {
    Rows(Vec<&'a AccessRecord>),
    Groups(Vec<(Value, Vec<&'a AccessRecord>)>),
    Table { grouped: bool, rows: Vec<(Option<Value>, Vec<Agg>)> },
    Text(&'a str),
    Captured(String),
}

fn row_line(r: &AccessRecord) -> String {
    format!(
        "program_counter={}, memory_address={}, evict={}",
        r.program_counter, r.memory_address, r.evict
    )
}

fn listed<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    let mut parts: Vec<String> = items.iter().take(MAX_LISTED).map(f).collect();
    if items.len() > MAX_LISTED {
        parts.push(format!("(+{} more)", items.len() - MAX_LISTED));
    }
    parts.join("; ")
}

fn slot(state: &State<'_>, name: &str) -> Result<String, RangerError> {
    let empty = || RangerError::EmptyResult(format!("nothing to bind to `{{{name}}}`"));
    Ok(match (state, name) {
        (State::Captured(s), "value" | "0") => s.clone(),
        (State::Table { rows, .. }, "value" | "top_value") => rows.first().ok_or_else(empty)?.1[0].render(),
        (State::Table { rows, .. }, n) if n.bytes().all(|b| b.is_ascii_digit()) => {
            let i: usize = n.parse().unwrap_or(usize::MAX);
            rows.first().ok_or_else(empty)?.1.get(i).ok_or_else(empty)?.render()
        }
        (State::Rows(r), "count") => r.len().to_string(),
        (State::Groups(g), "count") => g.len().to_string(),
        (State::Table { rows, .. }, "count") => rows.len().to_string(),
        (State::Rows(r), "rows") => listed(r, |r| row_line(r)),
        (State::Groups(g), "rows") => listed(g, |(k, rs)| format!("{} ({} rows)", k.render(), rs.len())),
        (State::Table { rows, .. }, "rows") => listed(rows, |(k, vs)| {
            let vals: Vec<String> = vs.iter().map(Agg::render).collect();
            match k {
                Some(k) => format!("{}: {}", k.render(), vals.join(", ")),
                None => vals.join(", "),
            }
        }),
        (State::Text(t), "rows") => t.to_string(),
        (State::Groups(g), "keys") => listed(g, |(k, _)| k.render()).replace("; ", ", "),
        (State::Table { rows, .. }, "keys") => {
            listed(rows, |(k, _)| k.as_ref().map_or_else(String::new, Value::render)).replace("; ", ", ")
        }
        (State::Groups(g), "top_key") => g.first().ok_or_else(empty)?.0.render(),
        (State::Table { rows, .. }, "top_key") => {
            rows.first().ok_or_else(empty)?.0.as_ref().map_or_else(String::new, Value::render)
        }
        _ => return Err(RangerError::Parse { position: 0, message: format!("placeholder `{{{name}}}` has no value") }),
    })
}

fn sort_by_agg(rows: &mut [(Option<Value>, Vec<Agg>)], descending: bool) {
    rows.sort_by(|a, b| match (a.1[0].sort_key(), b.1[0].sort_key()) {
        (Some(x), Some(y)) => {
            let o = x.total_cmp(&y);
            if descending { o.reverse() } else { o }
        }
        // missing values sort last in both directions
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
}

/// Runs one program against the store and renders its emit template.
pub fn evaluate(p: &QueryProgram, store: &TraceStore) -> Result<String, RangerError> {
    check_program(p).map_err(|(_, e)| e)?;
    let id = p.source.canonical_id();
    let bundle = store.get_by_id(&id).ok_or_else(|| RangerError::BundleNotFound(id.clone()))?;
    let mut state = match p.source {
        Source::Trace { .. } => {
            if bundle.records.is_empty() {
                return Err(RangerError::EmptyResult(format!("trace {id} has no records")));
            }
            State::Rows(bundle.records.iter().collect())
        }
        Source::Metadata { .. } => State::Text(&bundle.metadata),
    };
    for stage in &p.stages {
        state = match (state, stage) {
            (State::Rows(rows), Stage::Filter { column, op, value }) => {
                let kept: Vec<_> = rows.into_iter().filter(|r| compare(&column_value(r, *column), *op, value)).collect();
                if kept.is_empty() {
                    return Err(RangerError::EmptyResult(format!("`{stage}` matched no records in {id}")));
                }
                State::Rows(kept)
            }
            (State::Rows(rows), Stage::FilterIn { column, values }) => {
                let kept: Vec<_> = rows
                    .into_iter()
                    .filter(|r| {
                        let v = column_value(r, *column);
                        values.iter().any(|lit| compare(&v, CmpOp::Eq, lit))
                    })
                    .collect();
                if kept.is_empty() {
                    return Err(RangerError::EmptyResult(format!("`{stage}` matched no records in {id}")));
                }
                State::Rows(kept)
            }
            (State::Rows(rows), Stage::GroupBy(column)) => {
                let mut groups: BTreeMap<Value, Vec<&AccessRecord>> = BTreeMap::new();
                for r in rows {
                    groups.entry(column_value(r, *column)).or_default().push(r);
                }
                State::Groups(groups.into_iter().collect())
            }
            (State::Rows(rows), Stage::Aggregate(aggs)) => {
                State::Table { grouped: false, rows: vec![(None, aggs.iter().map(|a| aggregate(&rows, a)).collect())] }
            }
            (State::Groups(groups), Stage::Aggregate(aggs)) => State::Table {
                grouped: true,
                rows: groups
                    .into_iter()
                    .map(|(k, rs)| (Some(k), aggs.iter().map(|a| aggregate(&rs, a)).collect()))
                    .collect(),
            },
            (State::Rows(mut rows), Stage::Sort { key: SortKey::Column(c), descending }) => {
                rows.sort_by(|a, b| {
                    let o = column_value(a, *c).cmp(&column_value(b, *c));
                    if *descending { o.reverse() } else { o }
                });
                State::Rows(rows)
            }
            (State::Groups(mut g), Stage::Sort { key, descending }) => {
                g.sort_by(|a, b| {
                    let o = match key {
                        SortKey::Count => a.1.len().cmp(&b.1.len()),
                        _ => a.0.cmp(&b.0),
                    };
                    if *descending { o.reverse() } else { o }
                });
                State::Groups(g)
            }
            (State::Table { grouped, mut rows }, Stage::Sort { key, descending }) => {
                match key {
                    SortKey::Value => sort_by_agg(&mut rows, *descending),
                    _ => rows.sort_by(|a, b| {
                        let o = a.0.cmp(&b.0);
                        if *descending { o.reverse() } else { o }
                    }),
                }
                State::Table { grouped, rows }
            }
            (State::Rows(mut rows), Stage::Limit(n)) => {
                rows.truncate(*n);
                State::Rows(rows)
            }
            (State::Groups(mut g), Stage::Limit(n)) => {
                g.truncate(*n);
                State::Groups(g)
            }
            (State::Table { grouped, mut rows }, Stage::Limit(n)) => {
                rows.truncate(*n);
                State::Table { grouped, rows }
            }
            (State::Text(text), Stage::Extract(re)) => {
                let re = compile_regex(re).map_err(|m| RangerError::Parse { position: 0, message: m })?;
                let captured = re
                    .captures(text)
                    .and_then(|c| c.get(1))
                    .ok_or_else(|| RangerError::EmptyResult(format!("`{stage}` found no match in the metadata of {id}")))?;
                State::Captured(captured.as_str().to_string())
            }
            // check_program has already rejected every other combination
            (_, stage) => {
                return Err(RangerError::Parse { position: 0, message: format!("`{stage}` is not valid here") })
            }
        };
    }
    let mut out = String::new();
    for part in template_parts(&p.emit).map_err(|m| RangerError::Parse { position: 0, message: m })? {
        match part {
            Part::Text(t) => out.push_str(&t),
            Part::Slot(name) => out.push_str(&slot(&state, &name)?),
        }
    }
    Ok(out)
}

/// Evaluates each program in order; results are joined with newlines.
pub fn evaluate_script(s: &Script, store: &TraceStore) -> Result<String, RangerError> {
    let mut results = Vec::with_capacity(s.programs.len());
    for p in &s.programs {
        results.push(evaluate(p, store)?);
    }
    Ok(results.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_program;
    use super::*;
    use setscope_core::simulator::render_metadata;
    use setscope_core::simulator::summary::TraceSummary;
    use setscope_core::{Address, MissType, Outcome, Pc, TraceBundle, TraceKey};

    /// Four accesses by PC 0x405832 among eight; hand-tallied below.
    fn plant_store() -> TraceStore {
        let spec: [(u64, u64, bool, Option<u64>); 8] = [
            (0x405832, 0xa00, false, Some(5)),
            (0x409270, 0xb00, false, None),
            (0x405832, 0xa40, false, Some(2)),
            (0x405832, 0xa00, true, Some(9)),
            (0x409228, 0xc00, false, None),
            (0x405832, 0xa80, false, None),
            (0x409270, 0xb00, true, None),
            (0x409228, 0xc00, true, Some(1)),
        ];
        let records = spec
            .iter()
            .enumerate()
            .map(|(i, &(pc, addr, hit, reuse))| {
                let mut r = AccessRecord::new(Pc(pc), Address(addr), i as u32 % 2, if hit { Outcome::Hit } else { Outcome::Miss });
                if !hit {
                    r.miss_type = MissType::Capacity;
                }
                r.accessed_address_reuse_distance_numeric = reuse;
                r.function_name = format!("f{pc:x}");
                r
            })
            .collect();
        let summary = TraceSummary {
            total_accesses: 140704,
            total_misses: 133542,
            miss_rate: 94.91,
            pct_compulsory: 0.0,
            pct_capacity: 100.0,
            pct_conflict: 0.0,
            total_evictions: 133478,
            wrong_evictions: 87085,
            wrong_eviction_pct: 65.24,
            recency_miss_correlation: 0.18,
        };
        let bundle = TraceBundle {
            key: TraceKey::new("plant", "lru").unwrap(),
            records,
            metadata: render_metadata(&summary, true),
            description: String::new(),
        };
        TraceStore::new().put_bundle(bundle).unwrap()
    }

    fn run(src: &str) -> Result<String, RangerError> {
        evaluate(&parse_program(src).unwrap(), &plant_store())
    }

    #[test]
    fn counts_a_pc() {
        assert_eq!(
            run(r#"from plant/lru | filter program_counter = 0x405832 | aggregate count | emit "PC 0x405832 appeared {0} times""#).unwrap(),
            "PC 0x405832 appeared 4 times"
        );
    }

    #[test]
    fn metadata_extract() {
        assert_eq!(run(r#"metadata plant/lru | extract "([0-9.]+)% miss rate" | emit "{0}""#).unwrap(), "94.91");
    }

    #[test]
    fn empty_filter_is_empty_result() {
        let e = run(r#"from plant/lru | filter program_counter = 0x1 | aggregate count | emit "{0}""#).unwrap_err();
        assert!(matches!(e, RangerError::EmptyResult(_)), "{e:?}");
        let e = run(r#"metadata plant/lru | extract "(zzz)" | emit "{0}""#).unwrap_err();
        assert!(matches!(e, RangerError::EmptyResult(_)));
    }

    #[test]
    fn unknown_bundle() {
        let e = run(r#"from nope/lru | aggregate count | emit "{0}""#).unwrap_err();
        assert_eq!(e, RangerError::BundleNotFound("nope_evictions_lru".into()));
    }

    #[test]
    fn rates_means_and_nulls() {
        // PC 0x405832: 1 hit of 4 -> 75% miss; reuse 5, 2, 9 (one null) -> mean 5.33, sample std 3.51
        assert_eq!(
            run(r#"from plant/lru | filter program_counter = 0x405832 | aggregate rate_pct is_miss, mean accessed_address_reuse_distance_numeric, std accessed_address_reuse_distance_numeric, count accessed_address_reuse_distance_numeric | emit "{0}% {1} {2} {3}""#).unwrap(),
            "75.00% 5.33 3.51 3"
        );
        assert_eq!(
            run(r#"from plant/lru | filter accessed_address_reuse_distance_numeric > 4 | aggregate count | emit "{0}""#).unwrap(),
            "2"
        );
        assert_eq!(
            run(r#"from plant/lru | filter accessed_address_reuse_distance_numeric != 5 | aggregate count | emit "{0}""#).unwrap(),
            "3",
            "null cells never satisfy a comparison"
        );
        assert_eq!(
            run(r#"from plant/lru | filter accessed_address_reuse_distance_numeric = null | aggregate count | emit "{0}""#).unwrap(),
            "4"
        );
    }

    #[test]
    fn group_sort_limit() {
        assert_eq!(
            run(r#"from plant/lru | group_by program_counter | aggregate count | sort value desc | limit 2 | emit "{rows}""#).unwrap(),
            "0x405832: 4; 0x409228: 2"
        );
        assert_eq!(
            run(r#"from plant/lru | group_by program_counter | emit "{count} PCs: {keys}""#).unwrap(),
            "3 PCs: 0x405832, 0x409228, 0x409270"
        );
        assert_eq!(
            run(r#"from plant/lru | filter is_miss = 1 | group_by program_counter | aggregate count | sort value desc | emit "{top_key} with {top_value} misses""#).unwrap(),
            "0x405832 with 3 misses"
        );
        assert_eq!(
            run(r#"from plant/lru | filter evict = "cache hit" | sort memory_address desc | limit 1 | emit "{rows}""#).unwrap(),
            "program_counter=0x409228, memory_address=0xc00, evict=Cache Hit"
        );
        assert_eq!(
            run(r#"from plant/lru | filter program_counter in [0x409270, 0x409228] | aggregate max memory_address, sum cache_set_id | emit "{0} {1}""#).unwrap(),
            "0xc00 2"
        );
    }

    #[test]
    fn evaluation_is_read_only() {
        let store = plant_store();
        let before = store.clone();
        let p = parse_program(r#"from plant/lru | sort memory_address desc | limit 0 | emit "{count}""#).unwrap();
        assert_eq!(evaluate(&p, &store).unwrap(), "0");
        assert_eq!(store, before);
    }

    #[test]
    fn unchecked_ast_is_rejected_not_panicking() {
        let p = QueryProgram {
            source: Source::Trace { workload: "plant".into(), policy: "lru".into() },
            stages: vec![Stage::Extract("(x)".into())],
            emit: "{0}".into(),
        };
        assert!(matches!(evaluate(&p, &plant_store()), Err(RangerError::Parse { .. })));
    }
}
