//! End-to-end execution of a suite through retrieval, generation and scoring.

use setscope_core::TraceStore;
use setscope_rag::generator::{ConversationMemory, ModelClient};
use setscope_rag::pipeline::{Pipeline, PipelineConfig};

use crate::judge::{score_ara, Judge};
use crate::question::{BenchQuestion, Tier};
use crate::report::{BenchReport, QuestionResult, RunInfo};
use crate::score::{rejection_patterns, score_tg};

#[derive(Debug, Clone, Default)]
pub struct BenchConfig {
    pub pipeline: PipelineConfig,
    /// Added to the default rejection patterns for trick questions.
    pub extra_rejection_patterns: Vec<String>,
    /// Worker threads; 0 picks the machine's parallelism.
    pub threads: usize,
}

fn run_one(
    q: &BenchQuestion,
    store: &TraceStore,
    pipeline: &Pipeline<'_>,
    judge: Option<&dyn Judge>,
    patterns: &[regex::Regex],
) -> QuestionResult {
    let max_score = if q.tier == Tier::TG { 1 } else { 5 };
    let mut r = QuestionResult {
        id: q.id.clone(),
        tier: q.tier,
        category: q.category,
        score: 0,
        max_score,
        scored: false,
        answer: None,
        error: None,
        retriever_used: None,
        attempts: 0,
        judge_transcript: None,
    };
    if let Some(g) = &q.grounding {
        if store.get_by_id(&g.key).is_none() {
            r.error = Some(format!("grounding trace {} is not in the store", g.key));
            return r;
        }
    }
    // each question is its own session
    let a = match pipeline.ask(&q.text, &mut ConversationMemory::default()) {
        Ok(a) => a,
        Err(e) => {
            r.error = Some(e.to_string());
            return r;
        }
    };
    r.retriever_used = Some(a.retriever_used);
    r.attempts = a.attempts;
    match score_tg(&a.answer, &q.text, &q.expected, patterns) {
        Some(s) => {
            r.score = s;
            r.scored = true;
        }
        None => match judge.map(|j| score_ara(q, &a.answer, j)) {
            Some(Ok(j)) => {
                r.score = j.score;
                r.scored = true;
                r.judge_transcript = Some(j.transcript);
            }
            Some(Err(e)) => r.error = Some(e.to_string()),
            None => r.error = Some("no judge configured; left unscored".into()),
        },
    }
    r.answer = Some(a.answer);
    r
}

/// Runs every question, recording failures per question; never aborts.
pub fn run_bench(
    store: &TraceStore,
    client: &dyn ModelClient,
    judge: Option<&dyn Judge>,
    questions: &[BenchQuestion],
    config: &BenchConfig,
) -> BenchReport {
    let patterns = rejection_patterns(&config.extra_rejection_patterns);
    let pipeline = Pipeline::new(store, client, config.pipeline);
    let threads = match config.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .clamp(1, questions.len().max(1));
    let chunk = questions.len().div_ceil(threads).max(1);
    let results: Vec<QuestionResult> = std::thread::scope(|s| {
        let handles: Vec<_> = questions
            .chunks(chunk)
            .map(|qs| {
                let (pipeline, patterns) = (&pipeline, &patterns);
                s.spawn(move || qs.iter().map(|q| run_one(q, store, pipeline, judge, patterns)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("bench worker panicked")).collect()
    });
    let mut warnings = Vec::new();
    if store.is_empty() {
        warnings.push("trace store is empty; every question is unanswerable".to_string());
    }
    if questions.is_empty() {
        warnings.push("question suite is empty".to_string());
    }
    let run = RunInfo {
        retriever: config.pipeline.retriever.to_string(),
        client: client.name(),
        shots: config.pipeline.shots.count(),
    };
    BenchReport::from_results(run, results, warnings)
}
