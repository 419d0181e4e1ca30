//! Evaluation tooling: datasets, EM/F1 by generalization split, the
//! coarse-vs-fine pilot, negative-sample export and stage timing.

mod bench;
mod dataset;
mod metrics;
mod negatives;
mod pilot;

pub use bench::{bench, BenchReport, QuestionTiming};
pub use dataset::{load_dataset, parse_dataset, to_jsonl, verify_gold, DatasetError, DatasetItem};
pub use metrics::{answer_f1, classify_split, components_of, compositions_of, SplitLabel, TrainInventory};
pub use negatives::{export_negatives, negatives_jsonl, NegativeRecord, DEFAULT_NEGATIVES};
pub use pilot::{
    pilot_pool, run_pilot, MemorizationScorer, OracleScorer, PilotItemResult, PilotReport, PilotSplit,
    POOL_SIZE,
};

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::logical_form::{exact_match, SExpr};
use crate::pipeline::{Pipeline, Prediction, StageTimings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// A gold relation, class or entity never reached the candidates.
    NoCandidate,
    NoExecutableComposition,
    WrongExpression,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemResult {
    pub qid: String,
    pub split: SplitLabel,
    pub em: bool,
    pub f1: f64,
    pub predicted: Option<String>,
    pub failure: Option<FailureKind>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SplitMetrics {
    pub count: usize,
    /// Percentages.
    pub em: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub qid: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall: SplitMetrics,
    pub splits: BTreeMap<SplitLabel, SplitMetrics>,
    pub failures: BTreeMap<FailureKind, usize>,
    pub skipped: Vec<Skipped>,
    pub items: Vec<ItemResult>,
    pub timings: StageTimings,
}

impl EvalReport {
    /// Copy with every timing zeroed, for byte-exact comparisons.
    pub fn without_timings(&self) -> EvalReport {
        let mut r = self.clone();
        r.timings = StageTimings::default();
        for i in &mut r.items {
            i.timings = StageTimings::default();
        }
        r
    }

    pub fn has_failures(&self) -> bool {
        !self.skipped.is_empty() || self.items.iter().any(|i| i.failure.is_some())
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<14} {:>6} {:>8} {:>8}\n", "split", "items", "EM", "F1");
        let mut row = |name: &str, m: &SplitMetrics| {
            s.push_str(&format!("{name:<14} {:>6} {:>7.1}% {:>7.1}%\n", m.count, m.em, m.f1));
        };
        row("overall", &self.overall);
        for label in SplitLabel::ALL {
            if let Some(m) = self.splits.get(&label) {
                row(label.as_str(), m);
            }
        }
        s
    }
}

fn metrics<'a>(items: impl Iterator<Item = &'a ItemResult>) -> SplitMetrics {
    let (mut n, mut em, mut f1) = (0usize, 0usize, 0.0);
    for i in items {
        n += 1;
        em += usize::from(i.em);
        f1 += i.f1;
    }
    if n == 0 {
        return SplitMetrics::default();
    }
    SplitMetrics {
        count: n,
        em: 100.0 * em as f64 / n as f64,
        f1: 100.0 * f1 / n as f64,
    }
}

fn missing_candidate(gold: &SExpr, pred: &Prediction) -> bool {
    let rels: BTreeSet<&str> = pred.candidates.relations.iter().map(|c| c.id.as_str()).collect();
    let classes: BTreeSet<&str> = pred.candidates.classes.iter().map(|c| c.id.as_str()).collect();
    let ents: BTreeSet<&str> = pred.candidates.entities.iter().map(String::as_str).collect();
    gold.relations().iter().any(|r| !rels.contains(r))
        || gold.classes().iter().any(|c| !classes.contains(c))
        || gold.entities().iter().any(|e| !ents.contains(e))
}

/// Runs the pipeline on every test item (in parallel) and aggregates EM
/// and F1 overall and per split. Deterministic apart from timings.
pub fn evaluate(pipeline: &Pipeline, train: &TrainInventory, test: &[DatasetItem]) -> EvalReport {
    let outcomes: Vec<Result<ItemResult, Skipped>> = test
        .par_iter()
        .map(|item| {
            let skip = |reason: String| Skipped {
                qid: item.qid.clone(),
                reason,
            };
            let gold = item.gold().map_err(|e| skip(format!("gold does not parse: {e}")))?;
            let gold_answers = item.gold_answers(pipeline.kb()).unwrap_or_default();
            let pred = pipeline.answer(&item.question).map_err(|e| skip(e.to_string()))?;
            let expr = pred.composition.expression();
            let em = expr.is_some_and(|e| exact_match(e, &gold));
            let f1 = answer_f1(&pred.answers.clone().unwrap_or_default(), &gold_answers);
            let failure = if em {
                None
            } else if missing_candidate(&gold, &pred) {
                Some(FailureKind::NoCandidate)
            } else if expr.is_none() {
                Some(FailureKind::NoExecutableComposition)
            } else {
                Some(FailureKind::WrongExpression)
            };
            Ok(ItemResult {
                qid: item.qid.clone(),
                split: classify_split(&gold, train),
                em,
                f1,
                predicted: expr.map(|e| e.to_string()),
                failure,
                timings: pred.timings,
            })
        })
        .collect();

    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(i) => items.push(i),
            Err(s) => skipped.push(s),
        }
    }
    let mut splits = BTreeMap::new();
    for label in SplitLabel::ALL {
        let m = metrics(items.iter().filter(|i| i.split == label));
        if m.count > 0 {
            splits.insert(label, m);
        }
    }
    let mut failures = BTreeMap::new();
    for f in items.iter().filter_map(|i| i.failure) {
        *failures.entry(f).or_insert(0) += 1;
    }
    let mut timings = StageTimings::default();
    for i in &items {
        timings.add(&i.timings);
    }
    EvalReport {
        overall: metrics(items.iter()),
        splits,
        failures,
        skipped,
        items,
        timings,
    }
}
