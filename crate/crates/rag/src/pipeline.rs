//! Question in, grounded answer out: retriever selection plus generation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use setscope_core::TraceStore;

use crate::generator::{answer, AnswerProvenance, ClientError, ConversationMemory, Evidence, ModelClient, Shots};
use crate::ranger::{self, RangerError, DEFAULT_MAX_RETRIES};
use crate::sieve::{retrieve_for_question, LexicalRanker, NameRanker, DEFAULT_EXCERPT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverChoice {
    Sieve,
    Ranger,
    /// Sieve, falling back to Ranger for unanchored questions or empty excerpts.
    #[default]
    Auto,
}

impl FromStr for RetrieverChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sieve" => Ok(RetrieverChoice::Sieve),
            "ranger" => Ok(RetrieverChoice::Ranger),
            "auto" => Ok(RetrieverChoice::Auto),
            other => Err(format!("unknown retriever `{other}`; expected sieve, ranger or auto")),
        }
    }
}

impl fmt::Display for RetrieverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrieverChoice::Sieve => "sieve",
            RetrieverChoice::Ranger => "ranger",
            RetrieverChoice::Auto => "auto",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub retriever: RetrieverChoice,
    pub shots: Shots,
    pub max_retries: usize,
    pub excerpt_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            retriever: RetrieverChoice::Auto,
            shots: Shots::Zero,
            max_retries: DEFAULT_MAX_RETRIES,
            excerpt_cap: DEFAULT_EXCERPT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ranger(RangerError),
    #[error(transparent)]
    Client(#[from] ClientError),
}

impl From<RangerError> for PipelineError {
    fn from(e: RangerError) -> Self {
        match e {
            RangerError::Client(c) => PipelineError::Client(c),
            e => PipelineError::Ranger(e),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineAnswer {
    pub answer: String,
    /// Rendered evidence exactly as the model saw it.
    pub evidence: String,
    pub evidence_json: serde_json::Value,
    pub provenance: AnswerProvenance,
    pub retriever_used: String,
    pub attempts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
}

pub struct Pipeline<'a> {
    pub store: &'a TraceStore,
    pub client: &'a dyn ModelClient,
    pub config: PipelineConfig,
    pub ranker: &'a dyn NameRanker,
}

impl<'a> Pipeline<'a> {
    pub fn new(store: &'a TraceStore, client: &'a dyn ModelClient, config: PipelineConfig) -> Self {
        Pipeline { store, client, config, ranker: &LexicalRanker }
    }

    fn sieve(&self, question: &str) -> Evidence {
        match retrieve_for_question(self.store, question, self.ranker, self.config.excerpt_cap) {
            Ok(e) => Evidence::Sieve(e),
            Err(e) => Evidence::NotFound { retriever: "sieve".into(), message: e.to_string(), program: None },
        }
    }

    fn ranger(&self, question: &str) -> Result<Evidence, RangerError> {
        Evidence::from_ranger(ranger::retrieve(question, self.client, self.store, self.config.max_retries))
    }

    /// Retrieval only.
    pub fn retrieve(&self, question: &str) -> Result<Evidence, PipelineError> {
        Ok(match self.config.retriever {
            RetrieverChoice::Sieve => self.sieve(question),
            RetrieverChoice::Ranger => self.ranger(question)?,
            RetrieverChoice::Auto => {
                let sieve = self.sieve(question);
                let usable = match &sieve {
                    Evidence::Sieve(s) => s.filters.is_anchored() && !s.excerpt_empty(),
                    _ => false,
                };
                if usable {
                    sieve
                } else {
                    match self.ranger(question) {
                        Ok(e) => e,
                        Err(RangerError::Client(c)) => return Err(c.into()),
                        // a ranger that cannot produce a program leaves the sieve result standing
                        Err(e) => {
                            log::info!("ranger fallback failed, keeping sieve evidence: {e}");
                            sieve
                        }
                    }
                }
            }
        })
    }

    pub fn ask(&self, question: &str, memory: &mut ConversationMemory) -> Result<PipelineAnswer, PipelineError> {
        let evidence = self.retrieve(question)?;
        let a = answer(question, &evidence, memory, self.client, self.config.shots)?;
        Ok(PipelineAnswer {
            answer: a.text,
            evidence: evidence.render(),
            evidence_json: evidence.to_json(),
            retriever_used: evidence.retriever().to_string(),
            attempts: evidence.attempts(),
            program: a.provenance.program.clone(),
            provenance: a.provenance,
        })
    }
}
