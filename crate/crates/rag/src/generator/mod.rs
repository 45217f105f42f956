//! Grounded answer synthesis: prompt assembly, exemplars, memory and the
//! model call.

pub mod client;
pub mod echo;
pub mod memory;

use serde::{Deserialize, Serialize};

use crate::ranger::{RangerError, RangerOutcome};
use crate::sieve::{render_evidence, SieveEvidence, EVIDENCE_END, EVIDENCE_START, NOT_FOUND_SENTINEL};
pub use client::{file_client, ChatMessage, ClientError, LiveClient, ModelClient, Role, ScriptedClient};
pub use echo::GroundedEchoClient;
pub use memory::{AnswerProvenance, ChatTurn, ConversationMemory, MemoryContext};

pub const SUMMARY_HEADING: &str = "=== CONVERSATION SUMMARY ===";
pub const RECENT_HEADING: &str = "=== RECENT TURNS ===";
pub const FACTS_HEADING: &str = "=== RECALLED FACTS ===";
pub const EXAMPLES_HEADING: &str = "=== EXAMPLES ===";
pub const QUESTION_HEADING: &str = "=== QUESTION ===";
/// Facts recalled into each prompt.
pub const RECALL_K: usize = 3;

pub const SYSTEM_FRAMING: &str = "You are a cache replacement analysis assistant. Answer strictly from the evidence \
between the evidence markers. Quote numbers exactly as they appear there. If the evidence says a record or PC was \
not found, say the premise is not supported by the trace instead of guessing. For hit/miss questions answer \
\"Cache Hit\" or \"Cache Miss\".";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shots {
    #[default]
    Zero,
    One,
    Few,
}

impl Shots {
    pub fn count(self) -> usize {
        match self {
            Shots::Zero => 0,
            Shots::One => 1,
            Shots::Few => 3,
        }
    }

    pub fn from_count(n: usize) -> Option<Shots> {
        match n {
            0 => Some(Shots::Zero),
            1 => Some(Shots::One),
            3 => Some(Shots::Few),
            _ => None,
        }
    }
}

/// Context/response pair in the one-shot layout.
pub struct Exemplar {
    pub context: &'static str,
    pub response: &'static str,
}

pub const EXEMPLARS: [Exemplar; 3] = [
    Exemplar {
        context: "For policy LRU on workload lbm ... at PC 0x401dc9 and address 0x47ea85d37f:\n\
Cache result: Cache Miss\n\
Evicted address: 0x19e02d19b7f (needed again in 2304 accesses), Inserted address needed again in 3132 accesses.\n\
Answer the following question: Does the memory access with PC 0x401dc9 and address 0x47ea85d37f result in a cache hit or cache miss for the lbm workload and LRU replacement policy? The correct answer is,",
        response: "Cache Miss",
    },
    Exemplar {
        context: "For policy Belady on workload mcf ... at PC 0x4037ba and address 0x1b73be82e40:\n\
Cache result: Cache Hit\n\
No eviction, Accessed address needed again in 512 accesses.\n\
Answer the following question: Does the memory access with PC 0x4037ba and address 0x1b73be82e40 result in a cache hit or cache miss for the mcf workload and Belady replacement policy? The correct answer is,",
        response: "Cache Hit",
    },
    Exemplar {
        context: "For policy LRU on workload lbm ... PC 0x401e31 statistics: 1218 accesses, 674 hits, 544 misses, 44.66% miss rate.\n\
Answer the following question: What is the miss rate for PC 0x401e31 in lbm under LRU? The correct answer is,",
        response: "The miss rate for PC 0x401e31 is 44.66%.",
    },
];

/// Retrieved material an answer is grounded in.
#[derive(Debug, Clone)]
pub enum Evidence {
    Sieve(SieveEvidence),
    Ranger(RangerOutcome),
    /// Retrieval ran and found nothing; carries the reason.
    NotFound { retriever: String, message: String, program: Option<String> },
}

impl Evidence {
    /// Ranger runs that ended in an empty result become `NotFound`; other
    /// ranger failures stay errors.
    pub fn from_ranger(r: Result<RangerOutcome, RangerError>) -> Result<Evidence, RangerError> {
        match r {
            Ok(o) => Ok(Evidence::Ranger(o)),
            Err(RangerError::ExhaustedRetries { transcript })
                if transcript.last().is_some_and(|a| a.error.starts_with("not found")) =>
            {
                let last = transcript.last().unwrap();
                Ok(Evidence::NotFound {
                    retriever: "ranger".into(),
                    message: last.error.clone(),
                    program: Some(crate::ranger::extract_code(&last.generated).to_string()),
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn render(&self) -> String {
        match self {
            Evidence::Sieve(s) => render_evidence(s),
            Evidence::Ranger(o) => format!(
                "{EVIDENCE_START}\nQuery program:\n{}\nResult:\n{}\n{EVIDENCE_END}\n",
                o.program_text(),
                o.result
            ),
            Evidence::NotFound { message, .. } => {
                format!("{EVIDENCE_START}\n{NOT_FOUND_SENTINEL}\n{message}\n{EVIDENCE_END}\n")
            }
        }
    }

    pub fn retriever(&self) -> &str {
        match self {
            Evidence::Sieve(_) => "sieve",
            Evidence::Ranger(_) => "ranger",
            Evidence::NotFound { retriever, .. } => retriever,
        }
    }

    pub fn attempts(&self) -> usize {
        match self {
            Evidence::Ranger(o) => o.attempts,
            _ => 1,
        }
    }

    pub fn provenance(&self) -> AnswerProvenance {
        match self {
            Evidence::Sieve(s) => AnswerProvenance {
                retriever: "sieve".into(),
                keys: s.keys().iter().map(|k| k.canonical_id()).collect(),
                filters: serde_json::to_value(&s.filters).ok(),
                program: None,
            },
            Evidence::Ranger(o) => AnswerProvenance {
                retriever: "ranger".into(),
                keys: o.script.programs.iter().map(|p| p.source.canonical_id()).collect(),
                filters: None,
                program: Some(o.program_text()),
            },
            Evidence::NotFound { retriever, program, .. } => AnswerProvenance {
                retriever: retriever.clone(),
                keys: Vec::new(),
                filters: None,
                program: program.clone(),
            },
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Evidence::Sieve(s) => s.to_json(),
            Evidence::Ranger(o) => serde_json::json!({
                "program": o.program_text(),
                "result": o.result,
                "attempts": o.attempts,
                "transcript": o.transcript,
            }),
            Evidence::NotFound { message, program, .. } => {
                serde_json::json!({ "not_found": NOT_FOUND_SENTINEL, "message": message, "program": program })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Answer {
    pub text: String,
    pub provenance: AnswerProvenance,
    pub prompt: Vec<ChatMessage>,
}

/// Prompt order: system framing, summary and recent turns, recalled facts,
/// evidence, exemplars, question.
pub fn build_prompt(question: &str, evidence: &Evidence, memory: &MemoryContext, shots: Shots) -> Vec<ChatMessage> {
    let mut body = String::new();
    if !memory.summary.is_empty() {
        body.push_str(&format!("{SUMMARY_HEADING}\n{}\n", memory.summary));
    }
    if !memory.recent.is_empty() {
        body.push_str(&format!("{RECENT_HEADING}\n{}\n", memory.recent.join("\n")));
    }
    if !memory.facts.is_empty() {
        body.push_str(&format!("{FACTS_HEADING}\n{}\n", memory.facts.join("\n")));
    }
    body.push_str(&evidence.render());
    if shots.count() > 0 {
        body.push_str(&format!("{EXAMPLES_HEADING}\n"));
        for ex in EXEMPLARS.iter().take(shots.count()) {
            body.push_str(&format!("Context:\n{}\nResponse: {}\n", ex.context, ex.response));
        }
    }
    body.push_str(&format!("{QUESTION_HEADING}\n{question}\n"));
    vec![ChatMessage::system(SYSTEM_FRAMING), ChatMessage::user(body)]
}

/// Answers from `evidence`, then records the question and answer in memory.
/// A client failure leaves memory untouched.
pub fn answer(
    question: &str,
    evidence: &Evidence,
    memory: &mut ConversationMemory,
    client: &dyn ModelClient,
    shots: Shots,
) -> Result<Answer, ClientError> {
    // embedding failures degrade to token-overlap recall
    let q_embed = client.embed(question).and_then(Result::ok);
    let ctx = memory.context(question, q_embed.as_deref(), RECALL_K);
    let prompt = build_prompt(question, evidence, &ctx, shots);
    let text = client.chat(&prompt)?;
    let provenance = evidence.provenance();
    let a_embed = client.embed(&text).and_then(Result::ok);
    if let Some(t) = ChatTurn::new(Role::User, question, None) {
        memory.append(t, q_embed);
    }
    if let Some(t) = ChatTurn::new(Role::Assistant, text.clone(), Some(provenance.clone())) {
        memory.append(t, a_embed);
    }
    Ok(Answer { text, provenance, prompt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::{retrieve_for_question, LexicalRanker, DEFAULT_EXCERPT_CAP};
    use setscope_core::fixtures;

    fn sieve_evidence(q: &str) -> Evidence {
        let store = fixtures::store().unwrap();
        Evidence::Sieve(retrieve_for_question(&store, q, &LexicalRanker, DEFAULT_EXCERPT_CAP).unwrap())
    }

    #[test]
    fn prompt_sections_in_order() {
        let mut m = ConversationMemory::new(2, 4096);
        for t in ["graph miss rate question", "it was 12.00%", "and stream misses", "answer two"] {
            m.append(ChatTurn::new(Role::User, t, None).unwrap(), None);
        }
        let ctx = m.context("graph miss rate", None, 3);
        let p = build_prompt("What is the miss rate on graph under lru?", &sieve_evidence("miss rate on graph under lru"), &ctx, Shots::One);
        let body = &p[1].content;
        let pos = |s: &str| body.find(s).unwrap_or_else(|| panic!("missing {s}"));
        assert!(pos(SUMMARY_HEADING) < pos(RECENT_HEADING));
        assert!(pos(RECENT_HEADING) < pos(FACTS_HEADING));
        assert!(pos(FACTS_HEADING) < pos(EVIDENCE_START));
        assert!(pos(EVIDENCE_END) < pos(EXAMPLES_HEADING));
        assert!(pos(EXAMPLES_HEADING) < pos(QUESTION_HEADING));
        assert_eq!(p[0].role, Role::System);
    }

    #[test]
    fn exemplar_counts() {
        let ev = sieve_evidence("miss rate on graph under lru");
        let ctx = MemoryContext::default();
        for (shots, n) in [(Shots::Zero, 0), (Shots::One, 1), (Shots::Few, 3)] {
            let p = build_prompt("q", &ev, &ctx, shots);
            assert_eq!(p[1].content.matches("\nResponse: ").count(), n);
            assert_eq!(p[1].content.matches("Context:\n").count(), n);
        }
        assert!(EXEMPLARS[0].context.contains("needed again in 2304 accesses), Inserted address needed again in 3132 accesses."));
    }

    #[test]
    fn prompt_is_byte_stable() {
        let ev = sieve_evidence("miss rate on graph under lru");
        let m = ConversationMemory::default();
        let a = build_prompt("q", &ev, &m.context("q", None, 3), Shots::Few);
        let b = build_prompt("q", &ev, &m.context("q", None, 3), Shots::Few);
        assert_eq!(a, b);
    }

    #[test]
    fn client_error_leaves_memory_alone() {
        let mut m = ConversationMemory::default();
        m.append(ChatTurn::new(Role::User, "earlier", None).unwrap(), None);
        let before = m.clone();
        let c = ScriptedClient::new(Vec::<String>::new());
        let ev = sieve_evidence("miss rate on graph under lru");
        assert!(answer("q", &ev, &mut m, &c, Shots::Zero).is_err());
        assert_eq!(m, before);
    }

    #[test]
    fn answer_records_turns_with_provenance() {
        let mut m = ConversationMemory::default();
        let c = ScriptedClient::new(["Cache Miss"]);
        let ev = sieve_evidence("miss rate on graph under lru");
        let a = answer("q", &ev, &mut m, &c, Shots::Zero).unwrap();
        assert_eq!(a.text, "Cache Miss");
        assert_eq!(m.buffer.len(), 2);
        assert_eq!(m.buffer[1].provenance.as_ref().unwrap().keys, vec!["graph_evictions_lru".to_string()]);
    }

    #[test]
    fn not_found_evidence_carries_sentinel() {
        let store = fixtures::store().unwrap();
        let ev = Evidence::Sieve(
            retrieve_for_question(&store, "Does PC 0x4037aa in graph under lru access address 0x1b73be82e3f?", &LexicalRanker, 32).unwrap(),
        );
        let p = build_prompt("q", &ev, &MemoryContext::default(), Shots::Zero);
        assert!(p[1].content.contains(NOT_FOUND_SENTINEL));
        let c = ScriptedClient::new(["The premise is false: no such access exists in the trace."]);
        let a = answer("q", &ev, &mut ConversationMemory::default(), &c, Shots::Zero).unwrap();
        assert!(a.text.contains("premise"));
    }
}
