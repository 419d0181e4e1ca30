//! Per-stage wall-clock timing of the pipeline.

use std::time::Instant;

use serde::Serialize;

use crate::pipeline::{Pipeline, PipelineError, StageTimings, STAGES};

use super::DatasetItem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionTiming {
    pub qid: String,
    pub stages: StageTimings,
    /// Wall time of the whole `answer` call, measured separately.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub stages: Vec<String>,
    pub questions: Vec<QuestionTiming>,
    /// Sum over questions.
    pub aggregate: StageTimings,
    pub total: f64,
}

impl BenchReport {
    pub fn max_total(&self) -> f64 {
        self.questions.iter().map(|q| q.total).fold(0.0, f64::max)
    }

    pub fn table(&self) -> String {
        let n = self.questions.len().max(1) as f64;
        let mut out = format!("{:<20} {:>12} {:>12}\n", "stage", "total ms", "mean ms");
        for s in STAGES {
            let t = self.aggregate.stage(s).unwrap_or(0.0);
            out.push_str(&format!("{s:<20} {t:>12.3} {:>12.3}\n", t / n));
        }
        out.push_str(&format!("{:<20} {:>12.3} {:>12.3}\n", "wall", self.total, self.total / n));
        out
    }
}

/// Answers every item sequentially, so stage times are not distorted by
/// contention.
pub fn bench(pipeline: &Pipeline, items: &[DatasetItem]) -> Result<BenchReport, PipelineError> {
    let mut questions = Vec::with_capacity(items.len());
    let mut aggregate = StageTimings::default();
    let mut total = 0.0;
    for item in items {
        let t = Instant::now();
        let pred = pipeline.answer(&item.question)?;
        let wall = t.elapsed().as_secs_f64() * 1e3;
        aggregate.add(&pred.timings);
        total += wall;
        questions.push(QuestionTiming {
            qid: item.qid.clone(),
            stages: pred.timings,
            total: wall,
        });
    }
    Ok(BenchReport {
        stages: STAGES.iter().map(|s| s.to_string()).collect(),
        questions,
        aggregate,
        total,
    })
}
