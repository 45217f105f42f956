//! Rubric judges for reasoning-tier answers.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;
use setscope_rag::generator::{ChatMessage, ClientError, ModelClient};

use crate::question::{BenchQuestion, Expected};

static SCORE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bscore\s*[:=]\s*([0-9]+)\b").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error("no parseable `Score: N` in judge output: {0}")]
    Unparseable(String),
    #[error("score {0} is outside 0..=5")]
    OutOfRange(u64),
    #[error("no recorded score for question {0}")]
    Missing(String),
    #[error("question {0} has no rubric")]
    NotRubric(String),
    #[error("judge model failed: {0}")]
    Client(#[from] ClientError),
    #[error("score file: {0}")]
    File(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Judgement {
    pub score: u8,
    /// Judge prompt and output, or the score-file entry.
    pub transcript: String,
}

pub trait Judge: Send + Sync {
    fn judge(&self, question: &BenchQuestion, answer: &str) -> Result<Judgement, JudgeError>;
}

/// Reads the first `Score: N` and requires 0 <= N <= 5.
pub fn parse_score(output: &str) -> Result<u8, JudgeError> {
    let c = SCORE.captures(output).ok_or_else(|| JudgeError::Unparseable(output.chars().take(200).collect()))?;
    let n: u64 = c[1].parse().map_err(|_| JudgeError::Unparseable(c[0].to_string()))?;
    u8::try_from(n).ok().filter(|n| *n <= 5).ok_or(JudgeError::OutOfRange(n))
}

pub struct ModelJudge<'a> {
    pub client: &'a dyn ModelClient,
}

pub const JUDGE_SYSTEM: &str = "You grade answers about cache replacement behaviour on a 0 to 5 scale for correctness, \
use of evidence and clarity. Reply with `Score: N` followed by a one-line justification.";

impl Judge for ModelJudge<'_> {
    fn judge(&self, q: &BenchQuestion, answer: &str) -> Result<Judgement, JudgeError> {
        let Expected::Rubric { reference, criteria } = &q.expected else {
            return Err(JudgeError::NotRubric(q.id.clone()));
        };
        let user = format!(
            "Question:\n{}\n\nReference answer:\n{reference}\n\nCriteria:\n- {}\n\nCandidate answer:\n{answer}\n",
            q.text,
            criteria.join("\n- ")
        );
        let out = self.client.chat(&[ChatMessage::system(JUDGE_SYSTEM), ChatMessage::user(user.clone())])?;
        let score = parse_score(&out)?;
        Ok(Judgement { score, transcript: format!("{user}\n---\n{out}") })
    }
}

/// Human-assigned scores keyed by question id (a JSON object).
#[derive(Debug, Clone, Default)]
pub struct ScoreFileJudge {
    pub scores: BTreeMap<String, u64>,
}

impl ScoreFileJudge {
    pub fn from_json(text: &str) -> Result<Self, JudgeError> {
        serde_json::from_str(text).map(|scores| ScoreFileJudge { scores }).map_err(|e| JudgeError::File(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, JudgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| JudgeError::File(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl Judge for ScoreFileJudge {
    fn judge(&self, q: &BenchQuestion, _answer: &str) -> Result<Judgement, JudgeError> {
        let n = *self.scores.get(&q.id).ok_or_else(|| JudgeError::Missing(q.id.clone()))?;
        let score = u8::try_from(n).ok().filter(|n| *n <= 5).ok_or(JudgeError::OutOfRange(n))?;
        Ok(Judgement { score, transcript: format!("score file: {} = {score}", q.id) })
    }
}

pub fn score_ara(q: &BenchQuestion, answer: &str, judge: &dyn Judge) -> Result<Judgement, JudgeError> {
    judge.judge(q, answer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::{Category, Tier};
    use setscope_rag::generator::ScriptedClient;

    fn rubric_q() -> BenchQuestion {
        BenchQuestion {
            id: "ara-1".into(),
            tier: Tier::ARA,
            category: Category::PolicyAnalysis,
            text: "Why does belady beat lru?".into(),
            expected: Expected::Rubric { reference: "It sees the future.".into(), criteria: vec!["correctness".into()] },
            grounding: None,
        }
    }

    #[test]
    fn parses_scores() {
        assert_eq!(parse_score("Score: 3 — partially grounded").unwrap(), 3);
        assert_eq!(parse_score("score=5").unwrap(), 5);
        assert!(matches!(parse_score("Score: 7"), Err(JudgeError::OutOfRange(7))));
        assert!(matches!(parse_score("looks fine"), Err(JudgeError::Unparseable(_))));
    }

    #[test]
    fn model_judge_keeps_transcript() {
        let c = ScriptedClient::new(["Score: 3 — partially grounded"]);
        let j = ModelJudge { client: &c }.judge(&rubric_q(), "because").unwrap();
        assert_eq!(j.score, 3);
        assert!(j.transcript.contains("It sees the future.") && j.transcript.ends_with("partially grounded"));
        let c = ScriptedClient::new(["no idea"]);
        assert!(matches!(ModelJudge { client: &c }.judge(&rubric_q(), "x"), Err(JudgeError::Unparseable(_))));
    }

    #[test]
    fn score_file_passthrough() {
        let j = ScoreFileJudge::from_json(r#"{"ara-1": 4}"#).unwrap();
        assert_eq!(score_ara(&rubric_q(), "x", &j).unwrap().score, 4);
        let mut q = rubric_q();
        q.id = "ara-2".into();
        assert!(matches!(j.judge(&q, "x"), Err(JudgeError::Missing(_))));
    }
}
