//! System prompt for query-program generation. A pure function of the store
//! schema: same keys and columns, same bytes.

use std::fmt::Write;

use setscope_core::TraceStore;

use super::ast::{Column, ColumnKind};

pub const PROMPT_HEADING: &str = "RANGER QUERY LANGUAGE";
pub const TRACES_HEADING: &str = "Available traces:";

/// EBNF of the query language; published verbatim in the prompt.
pub const GRAMMAR: &str = r#"script    = program { ";" program } [ ";" ] ;
program   = source { "|" stage } "|" "emit" string ;
source    = ( "from" | "metadata" ) trace ;
trace     = workload "/" policy | workload "_evictions_" policy ;
stage     = "filter" column op literal
          | "filter" column "in" "[" literal { "," literal } "]"
          | "group_by" column
          | "aggregate" agg { "," agg }
          | "sort" ( column | "key" | "value" | "count" ) [ "asc" | "desc" ]
          | "limit" integer
          | "extract" string ;
agg       = "count" [ column ] | ( "sum" | "mean" | "std" | "min" | "max" | "rate_pct" ) column ;
op        = "=" | "!=" | "<" | "<=" | ">" | ">=" ;
literal   = integer | hex | float | string | "null" ;
"#;

const SEMANTICS: &str = "\
- `from` reads the record table of one trace; `metadata` reads its summary string.
- filter keeps matching records; comparisons with a missing (null) value are false, except `= null` and `!= null`. String comparisons ignore case.
- group_by turns records into groups ordered by key; aggregate then yields one row per group.
- aggregate functions: count (rows, or non-null values of a column), sum, mean, std (sample), min, max, rate_pct (percentage of non-null values that are non-zero; `rate_pct is_miss` is the miss rate).
- sort value orders aggregate rows by their first aggregate; sort count orders groups by size.
- extract applies a regex with exactly one capture group to a metadata string.
- emit placeholders: {0}, {1}, ... are aggregate outputs of the first row (or the extract capture); {value} = {0}; {count} = number of rows or groups; {rows} lists rows; {keys} lists group keys; {top_key} and {top_value} describe the first row. Write {{ and }} for literal braces.
- Numbers are rendered with two decimals, addresses and PCs as 0x hex.
- Several programs may be joined with `;` (one trace each); their results are joined by newlines.";

fn kind_label(k: ColumnKind) -> &'static str {
    match k {
        ColumnKind::Hex => "hex",
        ColumnKind::Int => "integer",
        ColumnKind::Str => "text",
        ColumnKind::List => "list, display only",
    }
}

pub fn build_system_prompt(store: &TraceStore) -> String {
    let mut p = String::new();
    writeln!(p, "SYSTEM PROMPT: {PROMPT_HEADING}").unwrap();
    writeln!(
        p,
        "You write programs in a small query language for analyzing cache memory trace data. \
         A program selects one trace, transforms its records or metadata, and emits a single answer string."
    )
    .unwrap();
    writeln!(p, "\n{TRACES_HEADING}").unwrap();
    for key in store.keys() {
        writeln!(p, "- {}", key.canonical_id()).unwrap();
    }
    writeln!(p, "Workloads: {}.", store.workloads().join(", ")).unwrap();
    writeln!(p, "Policies: {}.", store.policies().join(", ")).unwrap();

    writeln!(p, "\nRecord columns:").unwrap();
    for c in Column::ALL {
        writeln!(p, "- {} ({})", c.name(), kind_label(c.kind())).unwrap();
    }
    writeln!(
        p,
        "evict is \"Cache Hit\" or \"Cache Miss\"; is_miss is 1 for a miss; *_numeric columns are access counts (null when never reused)."
    )
    .unwrap();

    writeln!(p, "\nMetadata:").unwrap();
    writeln!(p, "- Each trace has one summary string (accesses, misses, evictions, miss rate, correlations).").unwrap();
    writeln!(p, "- Read it with `metadata workload/policy`.").unwrap();
    writeln!(p, "- Extract numbers with simple matching or regex, e.g. extract \"([0-9]+) total misses\".").unwrap();
    writeln!(
        p,
        "- Example: Cache Performance Summary: 140704 total accesses, 133542 total misses, 94.91% miss rate, \
         100.00% capacity misses, 0.00% conflict misses, 133478 total evictions, 87085 (65.24%) wrong evictions \
         where evicted line has lower reuse distance. The correlation between accessed address recency and cache misses is 0.18."
    )
    .unwrap();

    writeln!(p, "\nTask instructions:").unwrap();
    writeln!(p, "- First check matching workload/policy; then check PC/address; finally fall back to metadata.").unwrap();
    writeln!(p, "- Return a single result string with the requested numbers and enough context to verify them.").unwrap();
    writeln!(p, "- If nothing is found, the program fails with a clear not-found message; do not invent values.").unwrap();

    writeln!(p, "\nGrammar (EBNF):\n{GRAMMAR}").unwrap();
    writeln!(p, "Semantics:\n{SEMANTICS}").unwrap();

    writeln!(p, "\nOutput rules:").unwrap();
    writeln!(p, "- Output only the program text.").unwrap();
    writeln!(p, "- No markdown, explanations or comments.").unwrap();

    writeln!(p, "\nValid examples:").unwrap();
    writeln!(
        p,
        "  from lbm/lru | filter program_counter = 0x401e31 | aggregate rate_pct is_miss | emit \"The miss rate for PC 0x401e31 is {{0}}%.\""
    )
    .unwrap();
    writeln!(p, "    result: The miss rate for PC 0x401e31 is 44.69%.").unwrap();
    writeln!(p, "  metadata lbm/lru | extract \"([0-9.]+)% miss rate\" | emit \"The overall miss rate is {{0}}%.\"").unwrap();
    writeln!(p, "    result: The overall miss rate is 94.91%.").unwrap();
    writeln!(p, "Invalid examples:").unwrap();
    writeln!(p, "  result = df[\"miss_rate\"]        (not the query language)").unwrap();
    writeln!(p, "  from lbm/lru | filter pc = 0x401e31 | emit \"{{rows}}\"        (unknown column `pc`)").unwrap();
    p
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_program;
    use super::*;
    use setscope_core::fixtures;

    #[test]
    fn lists_every_key_and_column() {
        let store = fixtures::store().unwrap();
        let p = build_system_prompt(&store);
        let listed = p.split(TRACES_HEADING).nth(1).unwrap().lines().filter(|l| l.starts_with("- ")).take_while(|l| l.contains("_evictions_")).count();
        assert_eq!(listed, 12);
        for c in Column::ALL {
            assert!(p.contains(&format!("- {} (", c.name())));
        }
        assert!(p.contains("Extract numbers with simple matching or regex"));
        assert!(p.contains("First check matching workload/policy; then check PC/address; finally fall back to metadata"));
        assert!(p.contains("The miss rate for PC 0x401e31 is 44.69%."));
    }

    #[test]
    fn examples_in_prompt_are_what_they_claim() {
        let p = build_system_prompt(&fixtures::store().unwrap());
        let examples: Vec<&str> = p.lines().filter(|l| l.starts_with("  from ") || l.starts_with("  metadata ")).collect();
        assert_eq!(examples.len(), 3);
        assert!(parse_program(examples[0].trim()).is_ok());
        assert!(parse_program(examples[1].trim()).is_ok());
        let bad = examples[2].trim().split("        ").next().unwrap();
        assert!(parse_program(bad).is_err());
        assert!(parse_program("result = df[\"miss_rate\"]").is_err());
    }

    #[test]
    fn prompt_is_a_function_of_schema() {
        let store = fixtures::store().unwrap();
        assert_eq!(build_system_prompt(&store), build_system_prompt(&store.clone()));
        let mut smaller = TraceStore::new();
        for b in store.bundles().skip(1) {
            smaller = smaller.put_bundle(b.clone()).unwrap();
        }
        assert_ne!(build_system_prompt(&store), build_system_prompt(&smaller));
    }
}
