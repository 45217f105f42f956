//! Question schema and JSONL loading.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use setscope_core::QueryFilters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    /// Trace-grounded, binary exact-match scoring.
    TG,
    /// Architectural reasoning and analysis, rubric scored 0 to 5.
    ARA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    HitMiss,
    MissRate,
    PolicyComparison,
    Count,
    Arithmetic,
    Trick,
    MicroarchConcepts,
    CodeGeneration,
    PolicyAnalysis,
    WorkloadAnalysis,
    SemanticAnalysis,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::HitMiss,
        Category::MissRate,
        Category::PolicyComparison,
        Category::Count,
        Category::Arithmetic,
        Category::Trick,
        Category::MicroarchConcepts,
        Category::CodeGeneration,
        Category::PolicyAnalysis,
        Category::WorkloadAnalysis,
        Category::SemanticAnalysis,
    ];

    pub fn tier(self) -> Tier {
        if (self as usize) < 6 {
            Tier::TG
        } else {
            Tier::ARA
        }
    }

    /// Size of the category in the reference suite layout.
    pub fn reference_count(self) -> usize {
        match self {
            Category::HitMiss => 30,
            Category::MissRate => 10,
            Category::PolicyComparison => 15,
            Category::Count => 5,
            Category::Arithmetic => 10,
            Category::Trick => 5,
            _ => 5,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericUnit {
    /// Percentage; default tolerance 0.05 percentage points.
    Percent,
    /// Event count; exact.
    Count,
    /// Reuse distance in accesses, reported to two decimals.
    Distance,
}

impl NumericUnit {
    pub fn default_tolerance(self) -> f64 {
        match self {
            NumericUnit::Percent => 0.05,
            NumericUnit::Count => 0.0,
            NumericUnit::Distance => 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expected {
    /// Exactly one of `allowed` must be asserted and none of `alternatives`.
    Label {
        allowed: Vec<String>,
        #[serde(default)]
        alternatives: Vec<String>,
    },
    Numeric {
        value: f64,
        unit: NumericUnit,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tolerance: Option<f64>,
    },
    /// The question rests on `false_premise`; the answer must reject it.
    Trick { false_premise: String },
    Rubric { reference: String, criteria: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    /// Canonical trace id such as `graph_evictions_lru`.
    pub key: String,
    #[serde(default)]
    pub filters: QueryFilters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchQuestion {
    pub id: String,
    pub tier: Tier,
    pub category: Category,
    pub text: String,
    pub expected: Expected,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding: Option<Grounding>,
}

impl BenchQuestion {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.text.trim().is_empty() {
            return Err("empty question text".into());
        }
        if self.category.tier() != self.tier {
            return Err(format!("category {} belongs to tier {:?}, not {:?}", self.category, self.category.tier(), self.tier));
        }
        match (&self.expected, self.tier, self.category) {
            (Expected::Rubric { .. }, Tier::TG, _) => Err("trace-grounded questions need a label, numeric or trick answer".into()),
            (Expected::Rubric { reference, .. }, Tier::ARA, _) if reference.trim().is_empty() => Err("rubric without reference answer".into()),
            (Expected::Rubric { .. }, Tier::ARA, _) => Ok(()),
            (_, Tier::ARA, _) => Err("reasoning questions need a rubric".into()),
            (Expected::Trick { false_premise }, _, Category::Trick) if false_premise.trim().is_empty() => {
                Err("trick question without a false premise description".into())
            }
            (Expected::Trick { .. }, _, Category::Trick) => Ok(()),
            (_, _, Category::Trick) | (Expected::Trick { .. }, _, _) => Err("trick answers belong to the Trick category only".into()),
            (Expected::Label { allowed, .. }, _, _) if allowed.is_empty() => Err("label answer with no allowed labels".into()),
            (Expected::Numeric { value, tolerance, .. }, _, _) if !value.is_finite() || tolerance.is_some_and(|t| t.is_nan() || t < 0.0) => {
                Err("numeric answer needs a finite value and non-negative tolerance".into())
            }
            _ if self.grounding.is_none() => Err("trace-grounded questions need a grounding".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SchemaError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read question file: {0}")]
    Io(#[from] std::io::Error),
    #[error("{} invalid question line(s): {}", .0.len(), .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Schema(Vec<SchemaError>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Suite {
    pub questions: Vec<BenchQuestion>,
    pub warnings: Vec<String>,
}

impl Suite {
    /// Questions per category, in category order, omitting empty ones.
    pub fn counts(&self) -> Vec<(Category, usize)> {
        Category::ALL
            .iter()
            .map(|&c| (c, self.questions.iter().filter(|q| q.category == c).count()))
            .filter(|(_, n)| *n > 0)
            .collect()
    }
}

/// Parses JSONL text; blank lines are skipped. Every bad line is reported.
pub fn parse_questions(text: &str) -> Result<Suite, LoadError> {
    let mut questions: Vec<BenchQuestion> = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        match serde_json::from_str::<BenchQuestion>(line) {
            Ok(q) => match q.validate() {
                Err(message) => errors.push(SchemaError { line: line_no, message }),
                Ok(()) if questions.iter().any(|o| o.id == q.id) => {
                    errors.push(SchemaError { line: line_no, message: format!("duplicate id {}", q.id) })
                }
                Ok(()) => questions.push(q),
            },
            Err(e) => errors.push(SchemaError { line: line_no, message: e.to_string() }),
        }
    }
    if !errors.is_empty() {
        return Err(LoadError::Schema(errors));
    }
    let mut warnings = Vec::new();
    if questions.is_empty() {
        warnings.push("question file contains no questions; the suite is empty".to_string());
        log::warn!("{}", warnings[0]);
    }
    Ok(Suite { questions, warnings })
}

pub fn load_questions(path: &Path) -> Result<Suite, LoadError> {
    parse_questions(&std::fs::read_to_string(path)?)
}

pub fn to_jsonl(questions: &[BenchQuestion]) -> String {
    let mut out = String::new();
    for q in questions {
        out.push_str(&serde_json::to_string(q).expect("questions serialize"));
        out.push('\n');
    }
    out
}
