//! Errors surfaced by CLI commands, with stable exit codes.

use serde_json::json;
use setscope_core::persist::PersistError;
use setscope_core::simulator::SimError;
use setscope_core::stats::StatsError;
use setscope_rag::generator::ClientError;
use setscope_rag::pipeline::PipelineError;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_FOUND: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("model client: {0}")]
    Client(#[from] ClientError),
    #[error("retrieval failed: {0}")]
    Pipeline(PipelineError),
    #[error("{0}")]
    Bench(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Client(c) => CliError::Client(c),
            e => CliError::Pipeline(e),
        }
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::NotFound(_) => "not_found",
            CliError::Io(_) => "io",
            CliError::Persist(_) => "persist",
            CliError::Sim(_) => "simulation",
            CliError::Stats(StatsError::PcNotFound(_) | StatsError::WorkloadNotFound(_)) => "not_found",
            CliError::Stats(_) => "stats",
            CliError::Client(_) => "model_client",
            CliError::Pipeline(_) => "retrieval",
            CliError::Bench(_) => "bench",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => EXIT_USAGE,
            "not_found" => EXIT_NOT_FOUND,
            "model_client" | "retrieval" => EXIT_MODEL,
            _ => EXIT_RUNTIME,
        }
    }

    /// The structured form printed on standard error.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}
