//! Retriever that has the model write a query program, then parses and
//! evaluates it against the store, feeding errors back for a bounded number
//! of retries.

pub mod arbitrary;
pub mod ast;
pub mod eval;
pub mod parse;
pub mod prompt;

use serde::Serialize;
use setscope_core::TraceStore;

use crate::generator::client::{ChatMessage, ClientError, ModelClient};

pub use ast::{AggFn, Aggregate, CmpOp, Column, ColumnKind, Literal, QueryProgram, Script, SortKey, Source, Stage};
pub use eval::{evaluate, evaluate_script};
pub use parse::{parse_program, parse_script};
pub use prompt::build_system_prompt;

pub const DEFAULT_MAX_RETRIES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailedAttempt {
    pub generated: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RangerError {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("schema error: {message}")]
    Schema { column: String, message: String },
    #[error("trace {0} not found; use one of the listed traces")]
    BundleNotFound(String),
    #[error("not found: {0}")]
    EmptyResult(String),
    #[error("no valid program after {} attempts; last error: {}", .transcript.len(), .transcript.last().map_or("", |a| a.error.as_str()))]
    ExhaustedRetries { transcript: Vec<FailedAttempt> },
    #[error(transparent)]
    Client(#[from] ClientError),
}

impl RangerError {
    /// Errors the model can plausibly fix on another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            RangerError::Parse { .. } | RangerError::Schema { .. } | RangerError::BundleNotFound(_) | RangerError::EmptyResult(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangerOutcome {
    pub result: String,
    pub script: Script,
    /// Model calls made, including the successful one.
    pub attempts: usize,
    /// One entry per failed attempt, in order.
    pub transcript: Vec<FailedAttempt>,
}

impl RangerOutcome {
    pub fn program_text(&self) -> String {
        self.script.to_string()
    }
}

/// First fenced code block (language tag skipped), else the whole completion.
pub fn extract_code(completion: &str) -> &str {
    if let Some(start) = completion.find("```") {
        let rest = &completion[start + 3..];
        let body = match rest.find('\n') {
            Some(nl) if !rest[..nl].trim().contains(' ') && !rest[..nl].contains('|') => &rest[nl + 1..],
            _ => rest,
        };
        if let Some(end) = body.find("```") {
            return body[..end].trim();
        }
    }
    completion.trim()
}

fn run_once(completion: &str, store: &TraceStore) -> Result<(Script, String), RangerError> {
    let script = parse_script(extract_code(completion))?;
    let result = evaluate_script(&script, store)?;
    Ok((script, result))
}

/// Generate, parse, evaluate; on a retryable error the error text is sent
/// back and the model tries again, at most `max_retries` more times.
pub fn retrieve(
    question: &str,
    client: &dyn ModelClient,
    store: &TraceStore,
    max_retries: usize,
) -> Result<RangerOutcome, RangerError> {
    let mut messages = vec![ChatMessage::system(build_system_prompt(store)), ChatMessage::user(question)];
    let mut transcript = Vec::new();
    for attempt in 1..=max_retries + 1 {
        let completion = client.chat(&messages)?;
        match run_once(&completion, store) {
            Ok((script, result)) => return Ok(RangerOutcome { result, script, attempts: attempt, transcript }),
            Err(e) if e.is_retryable() => {
                log::debug!("ranger attempt {attempt} failed: {e}");
                transcript.push(FailedAttempt { generated: completion.clone(), error: e.to_string() });
                messages.push(ChatMessage::assistant(completion));
                messages.push(ChatMessage::user(format!("Your program failed: {e}\nReturn a corrected program.")));
            }
            Err(e) => return Err(e),
        }
    }
    Err(RangerError::ExhaustedRetries { transcript })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::client::ScriptedClient;
    use setscope_core::fixtures;

    const VALID: &str = r#"from stream/lru | aggregate count | emit "{0} accesses""#;

    #[test]
    fn extracts_fenced_code() {
        assert_eq!(extract_code("Here:\n```dsl\nfrom a/b | emit \"x\"\n```\nthanks"), "from a/b | emit \"x\"");
        assert_eq!(extract_code("```\nfrom a/b | emit \"x\"\n```"), "from a/b | emit \"x\"");
        assert_eq!(extract_code("```from a/b | emit \"x\"```"), "from a/b | emit \"x\"");
        assert_eq!(extract_code("  from a/b | emit \"x\"\n"), "from a/b | emit \"x\"");
    }

    #[test]
    fn first_try() {
        let store = fixtures::store().unwrap();
        let c = ScriptedClient::new([VALID]);
        let out = retrieve("how many accesses", &c, &store, 3).unwrap();
        assert_eq!(out.attempts, 1);
        assert_eq!(out.result, format!("{} accesses", fixtures::TRACE_LEN));
    }

    #[test]
    fn garbage_then_valid() {
        let store = fixtures::store().unwrap();
        let c = ScriptedClient::new(["result = df['pc'].count()", VALID]);
        let out = retrieve("how many accesses", &c, &store, 3).unwrap();
        assert_eq!(out.attempts, 2);
        assert_eq!(out.transcript.len(), 1);
        assert!(out.transcript[0].error.starts_with("parse error"));
        let second = &c.prompts()[1];
        assert_eq!(second.len(), 4);
        assert!(second[3].content.starts_with("Your program failed: parse error"));
    }

    #[test]
    fn always_invalid_exhausts() {
        let store = fixtures::store().unwrap();
        let c = ScriptedClient::new(["nope"; 10]);
        match retrieve("q", &c, &store, 3) {
            Err(RangerError::ExhaustedRetries { transcript }) => assert_eq!(transcript.len(), 4),
            other => panic!("{other:?}"),
        }
        assert_eq!(c.remaining(), 6);
    }

    #[test]
    fn client_failure_aborts() {
        let store = fixtures::store().unwrap();
        let c = ScriptedClient::new(Vec::<String>::new());
        assert!(matches!(retrieve("q", &c, &store, 3), Err(RangerError::Client(_))));
    }
}
