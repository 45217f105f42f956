//! Binary scoring for trace-grounded answers.

use std::sync::LazyLock;

use regex::Regex;

use crate::question::{Expected, NumericUnit};

/// Phrases that reject a question's premise.
pub const DEFAULT_REJECTION_PATTERNS: &[&str] = &[
    r"not found",
    r"does not appear",
    r"doesn't appear",
    r"never appears",
    r"no such",
    r"not supported",
    r"premise",
    r"does not access",
    r"doesn't access",
    r"never accesses",
    r"no (?:matching )?records?",
    r"no matching",
    r"cannot be confirmed",
    r"not present",
    r"invalid (?:question|assumption)",
];

/// Verdicts a trick answer must not assert.
const FABRICATED: &[&str] = &[r"\bcache hit\b", r"\bcache miss\b", r"^\s*yes\b", r"\bit does\b"];

static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[-0-9A-Za-z_.,%]+").unwrap());
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(-?(?:[0-9]{1,3}(?:,[0-9]{3})+|[0-9]+)(?:\.[0-9]+)?)(%?)$").unwrap());

/// Lowercase with whitespace runs collapsed; hex case folds with the rest.
pub fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn contains_label(answer: &str, label: &str) -> bool {
    let label = normalize(label);
    if label.is_empty() {
        return false;
    }
    let pat = format!(r"(?:^|[^a-z0-9_]){}(?:$|[^a-z0-9_])", regex::escape(&label));
    Regex::new(&pat).is_ok_and(|re| re.is_match(answer))
}

pub fn score_label(answer: &str, allowed: &[String], alternatives: &[String]) -> u8 {
    let a = normalize(answer);
    let hits = allowed.iter().filter(|l| contains_label(&a, l)).count();
    let wrong = alternatives.iter().filter(|l| !allowed.contains(l)).any(|l| contains_label(&a, l));
    u8::from(hits == 1 && !wrong)
}

/// Numbers in reading order as `(value, followed by %)`; hex tokens and
/// digits inside identifiers are skipped.
pub fn numbers(answer: &str) -> Vec<(f64, bool)> {
    WORD.find_iter(answer)
        .filter_map(|w| {
            let c = NUMBER.captures(w.as_str().trim_end_matches(['.', ',']))?;
            Some((c[1].replace(',', "").parse().ok()?, !c[2].is_empty()))
        })
        .collect()
}

/// The first candidate decides: the first percentage for rates, else the
/// first number.
pub fn score_numeric(answer: &str, value: f64, unit: NumericUnit, tolerance: Option<f64>) -> u8 {
    let tol = tolerance.unwrap_or_else(|| unit.default_tolerance());
    let nums = numbers(answer);
    let candidate = match unit {
        NumericUnit::Percent => nums.iter().find(|n| n.1).or(nums.first()),
        _ => nums.first(),
    };
    // 1e-9 absorbs binary rounding of two-decimal renderings
    u8::from(candidate.is_some_and(|(v, _)| (v - value).abs() <= tol + 1e-9))
}

pub fn score_trick(answer: &str, question: &str, patterns: &[Regex]) -> u8 {
    let a = normalize(answer);
    let rejects = patterns.iter().any(|p| p.is_match(&a));
    let verdict = FABRICATED.iter().any(|p| Regex::new(p).unwrap().is_match(&a));
    // any number not already in the question is a fabricated value
    let q: Vec<f64> = numbers(question).into_iter().map(|n| n.0).collect();
    let invented = numbers(answer).iter().any(|(v, _)| !q.contains(v));
    u8::from(rejects && !verdict && !invented)
}

pub fn rejection_patterns(extra: &[String]) -> Vec<Regex> {
    DEFAULT_REJECTION_PATTERNS
        .iter()
        .map(|s| s.to_string())
        .chain(extra.iter().cloned())
        .filter_map(|p| Regex::new(&format!("(?i){p}")).ok())
        .collect()
}

/// 0 or 1 for trace-grounded expectations; `None` for rubric questions.
pub fn score_tg(answer: &str, question: &str, expected: &Expected, patterns: &[Regex]) -> Option<u8> {
    Some(match expected {
        Expected::Label { allowed, alternatives } => score_label(answer, allowed, alternatives),
        Expected::Numeric { value, unit, tolerance } => score_numeric(answer, *value, *unit, *tolerance),
        Expected::Trick { .. } => score_trick(answer, question, patterns),
        Expected::Rubric { .. } => return None,
    })
}
