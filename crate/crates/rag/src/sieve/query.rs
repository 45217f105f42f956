//! Natural-language question to [`QueryFilters`].

use std::sync::LazyLock;

use regex::Regex;
use setscope_core::hex::parse_hex_u64;
use setscope_core::{Address, Outcome, Pc, QueryFilters};

use crate::intent::{hex_tokens, words};

/// Minimum similarity for a known name to be taken from a question.
pub const NAME_THRESHOLD: f64 = 0.6;

/// Scores how strongly a question refers to a known workload or policy name.
pub trait NameRanker: Send + Sync {
    /// Similarity in `[0, 1]`.
    fn similarity(&self, question: &str, name: &str) -> f64;
}

/// Token overlap plus normalized edit distance over word n-grams.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalRanker;

impl NameRanker for LexicalRanker {
    fn similarity(&self, question: &str, name: &str) -> f64 {
        let name = name.to_ascii_lowercase();
        let ws = words(question);
        let parts: Vec<&str> = name.split('_').filter(|p| !p.is_empty()).collect();
        let overlap = if parts.is_empty() {
            0.0
        } else {
            parts.iter().filter(|p| ws.iter().any(|w| w == *p)).count() as f64 / parts.len() as f64
        };
        let mut edit: f64 = 0.0;
        for n in 1..=parts.len().clamp(1, 3) {
            for gram in ws.windows(n) {
                edit = edit
                    .max(strsim::normalized_levenshtein(&gram.join("_"), &name))
                    .max(strsim::normalized_levenshtein(&gram.concat(), &name));
            }
        }
        overlap.max(edit)
    }
}

/// Best-scoring name at or above the threshold; `None` when nothing clears
/// it or two names tie for the top score.
pub fn best_name(question: &str, names: &[String], ranker: &dyn NameRanker) -> Option<String> {
    let mut scored: Vec<(f64, &String)> = names.iter().map(|n| (ranker.similarity(question, n), n)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    match scored.as_slice() {
        [(s, n), rest @ ..] if *s >= NAME_THRESHOLD => {
            if rest.first().is_some_and(|(s2, _)| (s - s2).abs() < 1e-9) {
                None
            } else {
                Some((*n).clone())
            }
        }
        _ => None,
    }
}

static PC_CONTEXT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:\bpcs?|program[ _]counters?|instruction)\s*[:=]?\s*$").unwrap());
static ADDR_CONTEXT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)(?:\baddress(?:es)?|\baddr|memory[ _]address|\bline)\s*[:=]?\s*$").unwrap()
});
static SET_ID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bset(?:[ _]id)?\s*[:=]?\s*(0b[01]+|\d+)\b").unwrap());
static ONLY_MISSES: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bonly (?:the )?(?:cache )?misses\b|\bmisses only\b").unwrap());
static ONLY_HITS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bonly (?:the )?(?:cache )?hits\b|\bhits only\b").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Pc,
    Address,
    Either,
}

fn role_of(preceding: &str, digits: usize) -> Role {
    // look back a short window so "PC 0x.. and address 0x.." binds each keyword to its own token
    let mut from = preceding.len().saturating_sub(24);
    while !preceding.is_char_boundary(from) {
        from += 1;
    }
    let window = &preceding[from..];
    let by_digits = if digits <= 8 { Role::Pc } else { Role::Address };
    let by_keyword = if PC_CONTEXT.is_match(window) {
        Some(Role::Pc)
    } else if ADDR_CONTEXT.is_match(window) {
        Some(Role::Address)
    } else {
        None
    };
    match by_keyword {
        None => by_digits,
        Some(k) if k == by_digits => k,
        Some(_) => Role::Either,
    }
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

/// Extracts workload, policy, PC, address, set and outcome filters.
///
/// Hex tokens of up to 8 digits are PCs and longer ones are addresses; a
/// "PC" or "address" keyword just before the token must agree with that
/// rule, and a disagreement leaves the token in `either`.
pub fn parse_query(
    text: &str,
    known_workloads: &[String],
    known_policies: &[String],
    ranker: &dyn NameRanker,
) -> QueryFilters {
    let mut f = QueryFilters {
        workload: best_name(text, known_workloads, ranker),
        policy: best_name(text, known_policies, ranker),
        ..QueryFilters::default()
    };
    for (start, digits) in hex_tokens(text) {
        let Ok(value) = parse_hex_u64(digits) else { continue };
        match role_of(&text[..start], digits.trim_start_matches('0').len().max(1)) {
            Role::Pc => push_unique(&mut f.pcs, Pc(value)),
            Role::Address => push_unique(&mut f.addresses, Address(value)),
            Role::Either => push_unique(&mut f.either, value),
        }
    }
    for c in SET_ID.captures_iter(text) {
        let raw = &c[1];
        let parsed = match raw.strip_prefix("0b").or_else(|| raw.strip_prefix("0B")) {
            Some(bits) => u32::from_str_radix(bits, 2).ok(),
            None => raw.parse().ok(),
        };
        if let Some(set) = parsed {
            push_unique(&mut f.set_ids, set);
        }
    }
    if ONLY_MISSES.is_match(text) {
        f.outcome = Some(Outcome::Miss);
    } else if ONLY_HITS.is_match(text) {
        f.outcome = Some(Outcome::Hit);
    }
    f
}
