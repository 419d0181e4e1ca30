//! Coarse versus fine candidate selection on one-hop questions.
//!
//! Each test item gets a pool of same-domain one-hop expressions
//! `(AND c (JOIN d x))` sharing the gold's anchor `x`. The coarse method
//! scores every whole expression against the question; the fine method
//! sums the softmax-normalized scores of the expression's relation and
//! class within the pool's component pools. A method is right only when
//! the gold is the unique best.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::kb::{domain_group, is_literal_class, KnowledgeBase};
use crate::logical_form::{Leaf, Operator, SExpr};
use crate::midgrain::{directions, DirRel};
use crate::retrieval::{describe_kb, score_expression_fine, ComponentKind, FinePools, Scorer, ScorerError};

use super::{classify_split, DatasetItem, SplitLabel, TrainInventory};

pub const POOL_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotSplit {
    Compositional,
    ZeroShot,
}

impl PilotSplit {
    fn label(self) -> SplitLabel {
        match self {
            PilotSplit::Compositional => SplitLabel::Compositional,
            PilotSplit::ZeroShot => SplitLabel::ZeroShot,
        }
    }
}

/// `(class, traversal, anchor)` of `(AND c (JOIN d x))` in either operand
/// order.
fn one_hop(expr: &SExpr) -> Option<(String, DirRel, SExpr)> {
    let SExpr::Node(Operator::And, args) = expr else {
        return None;
    };
    let (class, join) = match (&args[0], &args[1]) {
        (SExpr::Leaf(Leaf::Class(c)), j) | (j, SExpr::Leaf(Leaf::Class(c))) => (c, j),
        _ => return None,
    };
    let SExpr::Node(Operator::Join, j) = join else {
        return None;
    };
    let d = match &j[0] {
        SExpr::Leaf(Leaf::Relation(r)) => DirRel::forward(r.clone()),
        SExpr::Node(Operator::R, inner) => match &inner[0] {
            SExpr::Leaf(Leaf::Relation(r)) => DirRel::reverse(r.clone()),
            _ => return None,
        },
        _ => return None,
    };
    match &j[1] {
        anchor @ SExpr::Leaf(Leaf::Entity(_) | Leaf::Literal(_)) => Some((class.clone(), d, anchor.clone())),
        _ => None,
    }
}

/// The gold plus up to `POOL_SIZE - 1` other same-domain expressions, in
/// text order. `None` when the gold is not a one-hop class–relation–anchor
/// expression.
pub fn pilot_pool(gold: &SExpr, kb: &KnowledgeBase) -> Option<Vec<SExpr>> {
    let (_, d, anchor) = one_hop(gold)?;
    let group = domain_group(&d.relation);
    let mut others: BTreeMap<String, SExpr> = BTreeMap::new();
    for r in kb.relations().filter(|r| domain_group(&r.id) == group) {
        for dr in directions(&r.id, kb) {
            let Some(class) = dr.domain(kb) else { continue };
            if is_literal_class(class) {
                continue;
            }
            let e = SExpr::and(SExpr::class(class), SExpr::join(dr.to_expr(), anchor.clone()));
            others.insert(e.to_string(), e);
        }
    }
    let gold_text = gold.to_string();
    others.remove(&gold_text);
    let mut pool: Vec<SExpr> = others.into_values().take(POOL_SIZE - 1).collect();
    pool.push(gold.clone());
    pool.sort_by_cached_key(|e| e.to_string());
    Some(pool)
}

/// Scores gold component descriptions 1 and everything else 0.
pub struct OracleScorer {
    gold: BTreeMap<String, BTreeSet<String>>,
}

impl OracleScorer {
    pub fn new(items: &[DatasetItem], kb: &KnowledgeBase) -> OracleScorer {
        let descs: BTreeMap<(ComponentKind, String), String> = describe_kb(kb)
            .into_iter()
            .map(|d| ((d.kind, d.id), d.text))
            .collect();
        let mut gold: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for item in items {
            let Ok(g) = item.gold() else { continue };
            let texts = gold.entry(item.question.clone()).or_default();
            for r in g.relations() {
                texts.extend(descs.get(&(ComponentKind::Relation, r.to_string())).cloned());
            }
            for c in g.classes() {
                texts.extend(descs.get(&(ComponentKind::Class, c.to_string())).cloned());
            }
        }
        OracleScorer { gold }
    }
}

impl Scorer for OracleScorer {
    fn name(&self) -> &str {
        "oracle"
    }

    fn score(&self, question: &str, description: &str) -> Result<f64, ScorerError> {
        let hit = self.gold.get(question).is_some_and(|g| g.contains(description));
        Ok(if hit { 1.0 } else { 0.0 })
    }
}

/// Scores 1 for expressions (up to normalization) seen in training, 0 for
/// anything else.
pub struct MemorizationScorer {
    seen: BTreeSet<String>,
}

impl MemorizationScorer {
    pub fn new(train: &[DatasetItem]) -> MemorizationScorer {
        MemorizationScorer {
            seen: train
                .iter()
                .filter_map(|i| i.gold().ok())
                .map(|g| g.normalize().to_string())
                .collect(),
        }
    }
}

impl Scorer for MemorizationScorer {
    fn name(&self) -> &str {
        "memorization"
    }

    fn score(&self, _question: &str, text: &str) -> Result<f64, ScorerError> {
        let seen = SExpr::parse(text).is_ok_and(|e| self.seen.contains(&e.normalize().to_string()));
        Ok(if seen { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PilotItemResult {
    pub qid: String,
    pub pool_size: usize,
    pub coarse: bool,
    pub fine: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PilotSplitReport {
    pub split: PilotSplit,
    pub evaluated: usize,
    /// Percentages.
    pub coarse_accuracy: f64,
    pub fine_accuracy: f64,
    /// Items whose label under the training inventory is not this split.
    pub mislabeled: Vec<String>,
    pub skipped: Vec<super::Skipped>,
    pub items: Vec<PilotItemResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PilotReport {
    pub scorer: String,
    pub splits: Vec<PilotSplitReport>,
}

impl PilotReport {
    pub fn split(&self, s: PilotSplit) -> Option<&PilotSplitReport> {
        self.splits.iter().find(|r| r.split == s)
    }

    pub fn table(&self) -> String {
        let mut out = format!("scorer: {}\n{:<14} {:>6} {:>8} {:>8}\n", self.scorer, "split", "items", "coarse", "fine");
        for r in &self.splits {
            let name = r.split.label().as_str();
            out.push_str(&format!(
                "{name:<14} {:>6} {:>7.1}% {:>7.1}%\n",
                r.evaluated, r.coarse_accuracy, r.fine_accuracy
            ));
        }
        out
    }
}

/// The gold is strictly better than every other pool member.
fn unique_best(scores: &[f64], gold: usize) -> bool {
    scores.iter().enumerate().all(|(i, s)| i == gold || *s < scores[gold])
}

fn run_split(
    split: PilotSplit,
    items: &[DatasetItem],
    train: &TrainInventory,
    scorer: &dyn Scorer,
    kb: &KnowledgeBase,
    texts: &BTreeMap<(ComponentKind, String), String>,
) -> Result<PilotSplitReport, ScorerError> {
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    let mut mislabeled = Vec::new();
    for item in items {
        let skip = |reason: &str| super::Skipped {
            qid: item.qid.clone(),
            reason: reason.to_string(),
        };
        let Ok(gold) = item.gold() else {
            skipped.push(skip("gold does not parse"));
            continue;
        };
        if gold.relations().len() != 1 {
            skipped.push(skip("not a one-hop expression"));
            continue;
        }
        let Some(pool) = pilot_pool(&gold, kb) else {
            skipped.push(skip("not a class-relation-anchor expression"));
            continue;
        };
        if pool.len() < 2 {
            skipped.push(skip("pool has fewer than 2 expressions"));
            continue;
        }
        if classify_split(&gold, train) != split.label() {
            mislabeled.push(item.qid.clone());
        }
        let gi = pool.iter().position(|e| *e == gold).expect("gold is pooled");
        let mut pools = FinePools::default();
        let rels: BTreeSet<&str> = pool.iter().flat_map(|e| e.relations()).collect();
        let classes: BTreeSet<&str> = pool.iter().flat_map(|e| e.classes()).collect();
        for r in rels {
            if let Some(t) = texts.get(&(ComponentKind::Relation, r.to_string())) {
                pools.relations.push((r.to_string(), t.clone()));
            }
        }
        for c in classes {
            if let Some(t) = texts.get(&(ComponentKind::Class, c.to_string())) {
                pools.classes.push((c.to_string(), t.clone()));
            }
        }
        let mut coarse = Vec::with_capacity(pool.len());
        let mut fine = Vec::with_capacity(pool.len());
        for e in &pool {
            coarse.push(scorer.score(&item.question, &e.to_string())?);
            fine.push(
                score_expression_fine(&item.question, e, scorer, &pools).map_err(|err| match err {
                    crate::retrieval::RetrievalError::Scorer { source, .. } => source,
                    other => ScorerError {
                        scorer: scorer.name().to_string(),
                        message: other.to_string(),
                    },
                })?,
            );
        }
        results.push(PilotItemResult {
            qid: item.qid.clone(),
            pool_size: pool.len(),
            coarse: unique_best(&coarse, gi),
            fine: unique_best(&fine, gi),
        });
    }
    let n = results.len();
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    Ok(PilotSplitReport {
        split,
        evaluated: n,
        coarse_accuracy: pct(results.iter().filter(|r| r.coarse).count()),
        fine_accuracy: pct(results.iter().filter(|r| r.fine).count()),
        mislabeled,
        skipped,
        items: results,
    })
}

pub fn run_pilot(
    train: &[DatasetItem],
    test_comp: &[DatasetItem],
    test_zero: &[DatasetItem],
    scorer: &dyn Scorer,
    kb: &KnowledgeBase,
) -> Result<PilotReport, ScorerError> {
    let inv = TrainInventory::from_items(train);
    let texts: BTreeMap<(ComponentKind, String), String> = describe_kb(kb)
        .into_iter()
        .map(|d| ((d.kind, d.id), d.text))
        .collect();
    Ok(PilotReport {
        scorer: scorer.name().to_string(),
        splits: vec![
            run_split(PilotSplit::Compositional, test_comp, &inv, scorer, kb, &texts)?,
            run_split(PilotSplit::ZeroShot, test_zero, &inv, scorer, kb, &texts)?,
        ],
    })
}
