//! Question suites, answer scoring and benchmark reports for trace question answering.

pub mod judge;
pub mod question;
pub mod report;
pub mod run;
pub mod score;
pub mod suite;

pub use judge::{Judge, JudgeError, Judgement, ModelJudge, ScoreFileJudge};
pub use question::{
    load_questions, parse_questions, to_jsonl, BenchQuestion, Category, Expected, Grounding, LoadError, NumericUnit,
    SchemaError, Suite, Tier,
};
pub use report::{weighted_total, BenchReport, CategoryScore, QuestionResult, RunInfo};
pub use run::{run_bench, BenchConfig};
pub use suite::{generate_suite, DEFAULT_SEED};
