//! Per-session conversation memory: a sliding buffer of recent turns, a
//! rolling summary of evicted turns and a recallable fact index.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::client::Role;
use crate::intent::signature_tokens;

pub const DEFAULT_BUFFER_TURNS: usize = 8;
/// Four characters per token.
pub const CHARS_PER_TOKEN: usize = 4;
pub const DEFAULT_TOKEN_BUDGET: usize = 1024;
/// Longest line a single evicted turn contributes to the summary.
const SUMMARY_LINE_CHARS: usize = 160;
const SUMMARY_HEADER: &str = "Earlier conversation (oldest first, truncated):";

/// Where an answer's evidence came from; enough to re-run the retrieval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerProvenance {
    pub retriever: String,
    pub keys: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filters: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    /// Never empty.
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<AnswerProvenance>,
}

impl ChatTurn {
    /// `None` for blank text.
    pub fn new(role: Role, text: impl Into<String>, provenance: Option<AnswerProvenance>) -> Option<Self> {
        let text = text.into();
        (!text.trim().is_empty()).then_some(ChatTurn { role, text, provenance })
    }

    fn label(&self) -> &'static str {
        match self.role {
            Role::User => "User",
            Role::Assistant => "Assistant",
            Role::System => "System",
        }
    }

    pub fn line(&self) -> String {
        format!("{}: {}", self.label(), self.text.replace('\n', " "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub text: String,
    pub signature: BTreeSet<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
    /// Insertion order; larger is newer.
    pub seq: u64,
}

/// What memory contributes to one prompt; total length within the budget.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryContext {
    pub summary: String,
    pub recent: Vec<String>,
    pub facts: Vec<String>,
}

impl MemoryContext {
    pub fn chars(&self) -> usize {
        self.summary.chars().count()
            + self.recent.iter().map(|s| s.chars().count()).sum::<usize>()
            + self.facts.iter().map(|s| s.chars().count()).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationMemory {
    pub capacity: usize,
    pub buffer: VecDeque<ChatTurn>,
    pub summary: String,
    pub facts: Vec<Fact>,
    pub char_budget: usize,
    /// Number of summary updates; one per evicted turn.
    pub evictions: u64,
    next_seq: u64,
}

impl Default for ConversationMemory {
    fn default() -> Self {
        ConversationMemory::new(DEFAULT_BUFFER_TURNS, DEFAULT_TOKEN_BUDGET * CHARS_PER_TOKEN)
    }
}

fn truncate_chars(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        return s.to_string();
    }
    let mut out: String = s.chars().take(n.saturating_sub(3)).collect();
    out.push_str("...");
    out.chars().take(n).collect()
}

/// Keeps the last `n` characters.
fn tail_chars(s: &str, n: usize) -> String {
    let len = s.chars().count();
    s.chars().skip(len.saturating_sub(n)).collect()
}

fn cosine(a: &[f32], b: &[f32]) -> Option<f64> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    (na > 0.0 && nb > 0.0).then(|| dot / (na * nb))
}

impl ConversationMemory {
    pub fn new(capacity: usize, char_budget: usize) -> Self {
        ConversationMemory {
            capacity: capacity.max(1),
            buffer: VecDeque::new(),
            summary: String::new(),
            facts: Vec::new(),
            char_budget,
            evictions: 0,
            next_seq: 0,
        }
    }

    /// Appends a turn and indexes it as a fact. A full buffer evicts its
    /// oldest turn into the summary.
    pub fn append(&mut self, turn: ChatTurn, embedding: Option<Vec<f32>>) {
        self.facts.push(Fact {
            signature: signature_tokens(&turn.text).into_iter().collect(),
            text: turn.line(),
            embedding,
            seq: self.next_seq,
        });
        self.next_seq += 1;
        self.buffer.push_back(turn);
        while self.buffer.len() > self.capacity {
            let old = self.buffer.pop_front().expect("buffer over capacity is non-empty");
            self.summarize(&old);
        }
    }

    fn summarize(&mut self, turn: &ChatTurn) {
        let body = self.summary.strip_prefix(SUMMARY_HEADER).unwrap_or("").trim_start_matches('\n').to_string();
        let mut lines = if body.is_empty() { String::new() } else { format!("{body}\n") };
        lines.push_str(&truncate_chars(&turn.line(), SUMMARY_LINE_CHARS));
        // the oldest material falls off first once the summary outgrows its share
        let keep = (self.char_budget / 4).saturating_sub(SUMMARY_HEADER.len() + 1);
        self.summary = format!("{SUMMARY_HEADER}\n{}", tail_chars(&lines, keep));
        self.evictions += 1;
    }

    /// Top `k` facts by cosine similarity when both sides have embeddings,
    /// else by shared signature tokens. Ties go to the newer fact; facts
    /// with no overlap are not returned.
    pub fn recall(&self, query: &str, query_embedding: Option<&[f32]>, k: usize) -> Vec<&Fact> {
        let sig: BTreeSet<String> = signature_tokens(query).into_iter().collect();
        let mut scored: Vec<(f64, &Fact)> = self
            .facts
            .iter()
            .filter_map(|f| {
                let score = match (query_embedding, f.embedding.as_deref()) {
                    (Some(q), Some(e)) => cosine(q, e)?,
                    _ => f.signature.intersection(&sig).count() as f64,
                };
                (score > 0.0).then_some((score, f))
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.seq.cmp(&a.1.seq)));
        scored.into_iter().take(k).map(|(_, f)| f).collect()
    }

    /// Memory's share of a prompt: summary (at most a quarter of the budget),
    /// then the newest buffered turns, then recalled facts not already in
    /// the buffer, all within `char_budget`.
    pub fn context(&self, query: &str, query_embedding: Option<&[f32]>, k: usize) -> MemoryContext {
        let mut left = self.char_budget;
        let summary = tail_chars(&self.summary, left / 4);
        left -= summary.chars().count();
        let mut recent = Vec::new();
        for t in self.buffer.iter().rev() {
            let line = truncate_chars(&t.line(), SUMMARY_LINE_CHARS * 4);
            let n = line.chars().count();
            if n > left {
                break;
            }
            left -= n;
            recent.push(line);
        }
        recent.reverse();
        let mut facts = Vec::new();
        for f in self.recall(query, query_embedding, k) {
            if recent.contains(&f.text) {
                continue;
            }
            let line = truncate_chars(&f.text, SUMMARY_LINE_CHARS);
            let n = line.chars().count();
            if n > left {
                break;
            }
            left -= n;
            facts.push(line);
        }
        MemoryContext { summary, recent, facts }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(s: &str) -> ChatTurn {
        ChatTurn::new(Role::User, s, None).unwrap()
    }

    #[test]
    fn eviction_boundary() {
        let mut m = ConversationMemory::new(4, 4096);
        for i in 1..=4 {
            m.append(user(&format!("turn number {i}")), None);
        }
        assert!(m.summary.is_empty());
        assert_eq!(m.evictions, 0);
        m.append(user("turn number 5"), None);
        assert_eq!(m.buffer.len(), 4);
        assert_eq!(m.evictions, 1);
        assert!(m.summary.contains("turn number 1"));
        assert!(!m.summary.contains("turn number 2"));
    }

    #[test]
    fn recall_by_token_overlap() {
        let mut m = ConversationMemory::default();
        m.append(user("what is the hit rate of graph under belady"), None);
        m.append(user("the miss rate for PC 0x4037ba is 44.69%"), None);
        m.append(user("list unique PCs"), None);
        // overlap with "miss rate 0x4037ba": {miss, rate, 0x4037ba} = 3, {rate} = 1, {} = 0
        let got = m.recall("miss rate 0x4037ba", None, 3);
        assert_eq!(got.len(), 2);
        assert!(got[0].text.contains("0x4037ba"));
        assert!(got[1].text.contains("hit rate"));
    }

    #[test]
    fn ties_go_to_newer() {
        let mut m = ConversationMemory::default();
        m.append(user("lbm misses"), None);
        m.append(user("mcf misses"), None);
        let got = m.recall("misses", None, 2);
        assert!(got[0].text.contains("mcf"));
    }

    #[test]
    fn cosine_when_embeddings_exist() {
        let mut m = ConversationMemory::default();
        m.append(user("alpha"), Some(vec![1.0, 0.0]));
        m.append(user("beta"), Some(vec![0.0, 1.0]));
        let got = m.recall("unrelated words", Some(&[0.9, 0.1]), 1);
        assert_eq!(got[0].text, "User: alpha");
    }

    #[test]
    fn empty_recall() {
        assert!(ConversationMemory::default().recall("anything", None, 3).is_empty());
    }

    #[test]
    fn blank_turns_are_refused() {
        assert!(ChatTurn::new(Role::User, "  \n", None).is_none());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn memory_is_bounded(
            texts in proptest::collection::vec("[a-z0-9 ]{1,400}", 0..40),
            cap in 1usize..10,
            budget in 0usize..3000,
            query in "[a-z0-9 ]{0,50}",
        ) {
            let mut m = ConversationMemory::new(cap, budget);
            let mut evicted = 0u64;
            for (i, t) in texts.iter().enumerate() {
                let Some(turn) = ChatTurn::new(if i % 2 == 0 { Role::User } else { Role::Assistant }, t.clone(), None) else { continue };
                let full = m.buffer.len() == m.capacity;
                m.append(turn, None);
                evicted += u64::from(full);
                prop_assert!(m.buffer.len() <= cap);
                prop_assert_eq!(m.evictions, evicted);
            }
            prop_assert!(m.context(&query, None, 5).chars() <= budget);
        }
    }
}
