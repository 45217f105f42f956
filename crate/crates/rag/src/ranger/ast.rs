//! Query program syntax tree and its canonical text form.

use std::fmt;

/// Value type of a record column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Hex,
    Int,
    Str,
    /// List-valued; not usable in filters, grouping or aggregates.
    List,
}

macro_rules! columns {
    ($($variant:ident => $name:literal, $kind:ident;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Column {
            $($variant,)*
        }

        impl Column {
            pub const ALL: &'static [Column] = &[$(Column::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Column::$variant => $name,)*
                }
            }

            pub fn kind(self) -> ColumnKind {
                match self {
                    $(Column::$variant => ColumnKind::$kind,)*
                }
            }

            pub fn from_name(name: &str) -> Option<Column> {
                match name {
                    $($name => Some(Column::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

columns! {
    ProgramCounter => "program_counter", Hex;
    MemoryAddress => "memory_address", Hex;
    CacheSetId => "cache_set_id", Int;
    Evict => "evict", Str;
    MissType => "miss_type", Str;
    EvictedAddress => "evicted_address", Hex;
    AccessedAddressRecency => "accessed_address_recency", Str;
    AccessedAddressReuseDistance => "accessed_address_reuse_distance", Str;
    EvictedAddressReuseDistance => "evicted_address_reuse_distance", Str;
    FunctionName => "function_name", Str;
    FunctionCode => "function_code", Str;
    AssemblyCode => "assembly_code", Str;
    CurrentCacheLines => "current_cache_lines", List;
    RecentAccessHistory => "recent_access_history", List;
    CacheLineEvictionScores => "cache_line_eviction_scores", List;
    CurrentCacheLineAddresses => "current_cache_line_addresses", List;
    AccessedAddressRecencyNumeric => "accessed_address_recency_numeric", Int;
    AccessedAddressReuseDistanceNumeric => "accessed_address_reuse_distance_numeric", Int;
    EvictedAddressReuseDistanceNumeric => "evicted_address_reuse_distance_numeric", Int;
    IsMiss => "is_miss", Int;
}

impl Column {
    pub fn is_numeric(self) -> bool {
        matches!(self.kind(), ColumnKind::Hex | ColumnKind::Int)
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Source {
    Trace { workload: String, policy: String },
    Metadata { workload: String, policy: String },
}

impl Source {
    pub fn canonical_id(&self) -> String {
        let (Source::Trace { workload, policy } | Source::Metadata { workload, policy }) = self;
        format!("{workload}_evictions_{policy}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(u64),
    Hex(u64),
    /// Always finite.
    Float(f64),
    Str(String),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Count,
    Sum,
    Mean,
    Std,
    Min,
    Max,
    /// Percentage of non-null values that are non-zero.
    RatePct,
}

impl AggFn {
    pub const ALL: [AggFn; 7] = [AggFn::Count, AggFn::Sum, AggFn::Mean, AggFn::Std, AggFn::Min, AggFn::Max, AggFn::RatePct];

    pub fn name(self) -> &'static str {
        match self {
            AggFn::Count => "count",
            AggFn::Sum => "sum",
            AggFn::Mean => "mean",
            AggFn::Std => "std",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::RatePct => "rate_pct",
        }
    }

    pub fn from_name(s: &str) -> Option<AggFn> {
        AggFn::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// `count` may omit its column; every other function requires one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Aggregate {
    pub func: AggFn,
    pub column: Option<Column>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortKey {
    Column(Column),
    /// Group key.
    Key,
    /// First aggregate value.
    Value,
    /// Group size.
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Filter { column: Column, op: CmpOp, value: Literal },
    FilterIn { column: Column, values: Vec<Literal> },
    GroupBy(Column),
    Aggregate(Vec<Aggregate>),
    Sort { key: SortKey, descending: bool },
    Limit(usize),
    /// Regex with exactly one capture group, applied to a metadata source.
    Extract(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryProgram {
    pub source: Source,
    pub stages: Vec<Stage>,
    /// Template with `{placeholders}`; `{{` and `}}` are literal braces.
    pub emit: String,
}

/// One or more programs separated by `;`, each over a single bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Script {
    pub programs: Vec<QueryProgram>,
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Hex(v) => write!(f, "{v:#x}"),
            // Debug keeps a fraction or exponent so the token re-lexes as a float
            Literal::Float(v) => write!(f, "{v:?}"),
            Literal::Str(s) => f.write_str(&quote(s)),
            Literal::Null => f.write_str("null"),
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.column {
            Some(c) => write!(f, "{} {c}", self.func.name()),
            None => f.write_str(self.func.name()),
        }
    }
}

impl fmt::Display for SortKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SortKey::Column(c) => write!(f, "{c}"),
            SortKey::Key => f.write_str("key"),
            SortKey::Value => f.write_str("value"),
            SortKey::Count => f.write_str("count"),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Filter { column, op, value } => write!(f, "filter {column} {} {value}", op.symbol()),
            Stage::FilterIn { column, values } => {
                let vs: Vec<String> = values.iter().map(Literal::to_string).collect();
                write!(f, "filter {column} in [{}]", vs.join(", "))
            }
            Stage::GroupBy(c) => write!(f, "group_by {c}"),
            Stage::Aggregate(aggs) => {
                let vs: Vec<String> = aggs.iter().map(Aggregate::to_string).collect();
                write!(f, "aggregate {}", vs.join(", "))
            }
            Stage::Sort { key, descending } => write!(f, "sort {key} {}", if *descending { "desc" } else { "asc" }),
            Stage::Limit(n) => write!(f, "limit {n}"),
            Stage::Extract(re) => write!(f, "extract {}", quote(re)),
        }
    }
}

impl fmt::Display for QueryProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Trace { workload, policy } => write!(f, "from {workload}/{policy}")?,
            Source::Metadata { workload, policy } => write!(f, "metadata {workload}/{policy}")?,
        }
        for s in &self.stages {
            write!(f, " | {s}")?;
        }
        write!(f, " | emit {}", quote(&self.emit))
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.programs.iter().map(QueryProgram::to_string).collect();
        f.write_str(&parts.join(";\n"))
    }
}
