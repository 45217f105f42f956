//! Random program generation for fuzzing the parser and evaluator.

use rand::seq::SliceRandom;
use rand::Rng;

use super::ast::*;

const PLACEHOLDERS: &[&str] = &["0", "1", "2", "value", "count", "rows", "keys", "top_key", "top_value", "bogus"];
const REGEXES: &[&str] = &[
    "([0-9.]+)% miss rate",
    "([0-9]+) total accesses",
    "([0-9]+) total misses",
    "(\\d+) \\(([0-9.]+)%\\)",
    "correlation .* is ([-0-9.]+)",
    "(nothing here)",
    "([",
];
const STRINGS: &[&str] = &["Cache Hit", "cache miss", "Capacity", "Conflict", "Compulsory", "", "x\"y", "{}"];

fn literal<R: Rng>(rng: &mut R, column: Column) -> Literal {
    match (rng.gen_range(0..10), column.kind()) {
        (0, _) => Literal::Null,
        (1, _) => Literal::Str(STRINGS.choose(rng).unwrap().to_string()),
        (2, _) => Literal::Float(rng.gen_range(-10.0..1e6_f64)),
        (3, _) => Literal::Int(rng.gen::<u64>()),
        (_, ColumnKind::Hex) => Literal::Hex(if rng.gen_bool(0.5) { rng.gen_range(0x400000..0x410000) } else { rng.gen() }),
        (_, ColumnKind::Str) => Literal::Str(STRINGS.choose(rng).unwrap().to_string()),
        _ => Literal::Int(rng.gen_range(0..200)),
    }
}

fn column<R: Rng>(rng: &mut R) -> Column {
    *Column::ALL.choose(rng).unwrap()
}

fn stage<R: Rng>(rng: &mut R) -> Stage {
    match rng.gen_range(0..8) {
        0 | 1 => {
            let c = column(rng);
            Stage::Filter { column: c, op: *CmpOp::ALL.choose(rng).unwrap(), value: literal(rng, c) }
        }
        2 => {
            let c = column(rng);
            let n = rng.gen_range(1..4);
            Stage::FilterIn { column: c, values: (0..n).map(|_| literal(rng, c)).collect() }
        }
        3 => Stage::GroupBy(column(rng)),
        4 => {
            let n = rng.gen_range(1..4);
            Stage::Aggregate(
                (0..n)
                    .map(|_| {
                        let func = *AggFn::ALL.choose(rng).unwrap();
                        let column = if func == AggFn::Count && rng.gen_bool(0.5) { None } else { Some(column(rng)) };
                        Aggregate { func, column }
                    })
                    .collect(),
            )
        }
        5 => {
            let key = match rng.gen_range(0..4) {
                0 => SortKey::Key,
                1 => SortKey::Value,
                2 => SortKey::Count,
                _ => SortKey::Column(column(rng)),
            };
            Stage::Sort { key, descending: rng.gen() }
        }
        6 => Stage::Limit(rng.gen_range(0..100)),
        _ => Stage::Extract(REGEXES.choose(rng).unwrap().to_string()),
    }
}

fn emit<R: Rng>(rng: &mut R) -> String {
    let mut s = String::from("answer");
    for _ in 0..rng.gen_range(0..3) {
        s.push_str(&format!(" {{{}}}", PLACEHOLDERS.choose(rng).unwrap()));
    }
    if rng.gen_bool(0.1) {
        s.push_str(" {{literal}}");
    }
    s
}

/// A syntactically well-formed program; it may or may not pass checking.
pub fn random_program<R: Rng>(rng: &mut R, keys: &[(String, String)]) -> QueryProgram {
    let (workload, policy) = if keys.is_empty() || rng.gen_bool(0.05) {
        ("missing".to_string(), "lru".to_string())
    } else {
        keys.choose(rng).unwrap().clone()
    };
    let source = if rng.gen_bool(0.2) { Source::Metadata { workload, policy } } else { Source::Trace { workload, policy } };
    let n = rng.gen_range(0..6);
    QueryProgram { source, stages: (0..n).map(|_| stage(rng)).collect(), emit: emit(rng) }
}

pub fn random_script<R: Rng>(rng: &mut R, keys: &[(String, String)]) -> Script {
    let n = rng.gen_range(1..3);
    Script { programs: (0..n).map(|_| random_program(rng, keys)).collect() }
}
