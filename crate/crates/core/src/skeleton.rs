//! Logical-skeleton proposal: enumerate a closed skeleton grammar, rank it
//! with a pluggable scorer, and pair the top-1 with its one-hop/two-hop
//! counterpart.
//!
//! The grammar never uses `R`; direction is decided when a slot is filled.
//!
//! ```text
//! Root   := Q | (COUNT Q) | (ARGMAX Q P) | (ARGMIN Q P)
//! Q      := <class> | Conj | (AND <class> Conj)
//! Conj   := Cons | (AND Cons Conj)
//! Cons   := (JOIN <rel> Anchor) | (CMP P <literal>)
//! Anchor := <entity> | <literal> | (JOIN <rel> Anchor)
//! P      := <rel> | (JOIN <rel> P)
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::linking::extract_literals;
use crate::logical_form::{Operator, Placeholder, SExpr, Skeleton};
use crate::retrieval::ScorerError;

fn rel() -> SExpr {
    SExpr::slot(Placeholder::Rel)
}

const COMPARISONS: [Operator; 4] = [Operator::Lt, Operator::Le, Operator::Gt, Operator::Ge];

struct Grammar<'a> {
    allow: &'a BTreeSet<Operator>,
}

impl Grammar<'_> {
    fn allowed(&self, op: Operator) -> bool {
        self.allow.contains(&op)
    }

    /// Relation paths with exactly `b` relations.
    fn paths(&self, b: usize) -> Vec<SExpr> {
        match b {
            0 => vec![],
            1 => vec![rel()],
            _ if self.allowed(Operator::Join) => self
                .paths(b - 1)
                .into_iter()
                .map(|p| SExpr::join(rel(), p))
                .collect(),
            _ => vec![],
        }
    }

    fn anchors(&self, b: usize) -> Vec<SExpr> {
        if b == 0 {
            vec![SExpr::slot(Placeholder::Entity), SExpr::slot(Placeholder::Literal)]
        } else {
            self.chains(b)
        }
    }

    fn chains(&self, b: usize) -> Vec<SExpr> {
        if b == 0 || !self.allowed(Operator::Join) {
            return vec![];
        }
        self.anchors(b - 1)
            .into_iter()
            .map(|a| SExpr::join(rel(), a))
            .collect()
    }

    fn constraints(&self, b: usize) -> Vec<SExpr> {
        let mut out = self.chains(b);
        for op in COMPARISONS.into_iter().filter(|op| self.allowed(*op)) {
            for p in self.paths(b) {
                out.push(SExpr::node(op, vec![p, SExpr::slot(Placeholder::Literal)]));
            }
        }
        out
    }

    fn conjunctions(&self, b: usize) -> Vec<SExpr> {
        let mut out = self.constraints(b);
        if self.allowed(Operator::And) {
            for b1 in 1..b {
                for c in self.constraints(b1) {
                    for rest in self.conjunctions(b - b1) {
                        out.push(SExpr::and(c.clone(), rest));
                    }
                }
            }
        }
        out
    }

    fn queries(&self, b: usize) -> Vec<SExpr> {
        if b == 0 {
            return vec![SExpr::slot(Placeholder::Class)];
        }
        let conj = self.conjunctions(b);
        let mut out = conj.clone();
        if self.allowed(Operator::And) {
            out.extend(
                conj.into_iter()
                    .map(|c| SExpr::and(SExpr::slot(Placeholder::Class), c)),
            );
        }
        out
    }

    fn roots(&self, b: usize) -> Vec<SExpr> {
        let mut out = self.queries(b);
        if self.allowed(Operator::Count) {
            let counted: Vec<SExpr> = self.queries(b).into_iter().map(SExpr::count).collect();
            out.extend(counted);
        }
        for op in [Operator::ArgMax, Operator::ArgMin] {
            if !self.allowed(op) {
                continue;
            }
            for b2 in 1..=b {
                for q in self.queries(b - b2) {
                    for p in self.paths(b2) {
                        out.push(SExpr::node(op, vec![q.clone(), p]));
                    }
                }
            }
        }
        out
    }
}

/// Every skeleton of the grammar with at most `max_hops` relations using
/// only `allow`ed operators, deduplicated up to conjunct order and sorted by
/// relation count, size, then text.
pub fn enumerate_skeletons(max_hops: usize, allow: &BTreeSet<Operator>) -> Vec<Skeleton> {
    let g = Grammar { allow };
    let mut seen: BTreeMap<String, Skeleton> = BTreeMap::new();
    for b in 0..=max_hops {
        for e in g.roots(b) {
            let sk = Skeleton::new(e).expect("grammar output is a skeleton").canonical();
            seen.entry(sk.to_string()).or_insert(sk);
        }
    }
    let mut out: Vec<Skeleton> = seen.into_values().collect();
    out.sort_by_cached_key(|s| (s.relation_count(), s.as_expr().node_count(), s.to_string()));
    out
}

pub fn all_operators() -> BTreeSet<Operator> {
    Operator::ALL.into_iter().collect()
}

/// Deterministic map from (masked question, skeleton) to a score.
pub trait SkeletonScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, masked_question: &str, skeleton: &Skeleton) -> Result<f64, ScorerError>;
}

const MAX_CUES: &[&str] = &[
    "most", "largest", "longest", "highest", "biggest", "latest", "newest", "tallest",
    "greatest", "maximum", "last",
];
const MIN_CUES: &[&str] = &[
    "least", "smallest", "shortest", "lowest", "earliest", "oldest", "fewest", "minimum",
    "first",
];
const GT_CUES: &[&str] = &[
    "more than", "greater than", "larger than", "longer than", "taller than", "over", "above",
    "after", "later than", "at least", "exceeding",
];
const LT_CUES: &[&str] = &[
    "less than", "fewer than", "smaller than", "shorter than", "under", "below", "before",
    "earlier than", "at most", "no more than",
];

fn has_cue(words: &[String], text: &str, cues: &[&str]) -> bool {
    cues.iter().any(|c| {
        if c.contains(' ') {
            text.contains(c)
        } else {
            words.iter().any(|w| w == c)
        }
    })
}

/// Feature heuristic:
///
/// * `how many` / `number of` ask for `COUNT`;
/// * superlatives ask for `ARGMAX` / `ARGMIN`, comparatives for comparisons;
/// * `<literal>` slots should match the literals in the question;
/// * a `<class>` slot earns a small bonus, every `<rel>` a small penalty
///   (summed component scores otherwise favour longer expressions).
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicSkeletonScorer;

struct Cues {
    count: bool,
    max: bool,
    min: bool,
    gt: bool,
    lt: bool,
    literals: usize,
}

impl Cues {
    fn of(masked: &str) -> Cues {
        let text = masked.to_lowercase();
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect();
        Cues {
            count: text.contains("how many") || text.contains("number of"),
            max: has_cue(&words, &text, MAX_CUES),
            min: has_cue(&words, &text, MIN_CUES),
            gt: has_cue(&words, &text, GT_CUES),
            lt: has_cue(&words, &text, LT_CUES),
            literals: extract_literals(masked).len(),
        }
    }
}

impl SkeletonScorer for HeuristicSkeletonScorer {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn score(&self, masked_question: &str, skeleton: &Skeleton) -> Result<f64, ScorerError> {
        let cues = Cues::of(masked_question);
        let expr = skeleton.as_expr();
        let ops = expr.operators();
        let has = |op: Operator| ops.contains(&op);
        let mut s = 0.0;
        let root_count = matches!(expr, SExpr::Node(Operator::Count, _));
        s += match (cues.count, root_count) {
            (true, true) | (false, false) => 0.0,
            (true, false) | (false, true) => -3.0,
        };
        for (cue, op) in [(cues.max, Operator::ArgMax), (cues.min, Operator::ArgMin)] {
            s += match (cue, has(op)) {
                (true, true) => 3.0,
                (false, true) => -3.0,
                _ => 0.0,
            };
        }
        let gt = has(Operator::Gt) || has(Operator::Ge);
        let lt = has(Operator::Lt) || has(Operator::Le);
        for (cue, present) in [(cues.gt, gt), (cues.lt, lt)] {
            s += match (cue, present) {
                (true, true) => 2.0,
                (false, true) => -2.0,
                _ => 0.0,
            };
        }
        // strict and non-strict variants tie on cues; prefer strict
        if has(Operator::Ge) || has(Operator::Le) {
            s -= 0.1;
        }
        let lits = skeleton.count(Placeholder::Literal);
        s -= 2.0 * lits.abs_diff(cues.literals) as f64;
        if skeleton.count(Placeholder::Class) > 0 {
            s += 0.5;
        }
        s -= 0.1 * skeleton.relation_count() as f64;
        Ok(s)
    }
}

pub const SKELETON_SCORER_NAMES: &[&str] = &["heuristic"];

pub fn skeleton_scorer_by_name(name: &str) -> Option<Box<dyn SkeletonScorer>> {
    match name {
        "heuristic" => Some(Box::new(HeuristicSkeletonScorer)),
        _ => None,
    }
}

fn is_rel(e: &SExpr) -> bool {
    matches!(e, SExpr::Leaf(l) if l.is_slot() && l.placeholder() == Placeholder::Rel)
}

/// Replace every relation-path occurrence through `f`; used to rewrite the
/// single path of a skeleton.
fn rewrite(expr: &SExpr, f: &dyn Fn(&SExpr, bool) -> Option<SExpr>) -> SExpr {
    fn go(e: &SExpr, in_path: bool, f: &dyn Fn(&SExpr, bool) -> Option<SExpr>) -> SExpr {
        if let Some(r) = f(e, in_path) {
            return r;
        }
        match e {
            SExpr::Leaf(_) => e.clone(),
            SExpr::Node(op, args) => {
                let sig = op.signature(if in_path {
                    crate::logical_form::Sort::Relation
                } else {
                    crate::logical_form::Sort::Set
                });
                let args = args
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        let child_path =
                            sig.is_some_and(|s| s[i] == crate::logical_form::Sort::Relation);
                        go(a, child_path, f)
                    })
                    .collect();
                SExpr::Node(*op, args)
            }
        }
    }
    go(expr, false, f)
}

/// `<rel>` ⇄ `<rel><rel>`: a skeleton with exactly one relation gets that
/// relation replaced by a two-hop chain; a skeleton whose only two
/// relations are chained gets collapsed to one hop. Anything else: `None`.
pub fn rule_augment(top1: &Skeleton) -> Option<Skeleton> {
    let expr = top1.as_expr();
    let out = match top1.relation_count() {
        1 => rewrite(expr, &|e, in_path| {
            if in_path && is_rel(e) {
                return Some(SExpr::join(rel(), rel()));
            }
            match e {
                SExpr::Node(Operator::Join, a) if !in_path && is_rel(&a[0]) => {
                    Some(SExpr::join(rel(), SExpr::join(rel(), a[1].clone())))
                }
                _ => None,
            }
        }),
        2 => {
            let collapsed = rewrite(expr, &|e, in_path| match e {
                SExpr::Node(Operator::Join, a) if in_path && is_rel(&a[0]) && is_rel(&a[1]) => {
                    Some(rel())
                }
                SExpr::Node(Operator::Join, a) if !in_path && is_rel(&a[0]) => match &a[1] {
                    SExpr::Node(Operator::Join, inner) if is_rel(&inner[0]) => {
                        Some(SExpr::join(rel(), inner[1].clone()))
                    }
                    _ => None,
                },
                _ => None,
            });
            if collapsed.count_kind(Placeholder::Rel) != 1 {
                return None;
            }
            collapsed
        }
        _ => return None,
    };
    Skeleton::new(out).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonCandidate {
    #[serde(serialize_with = "crate::skeleton::display")]
    pub skeleton: Skeleton,
    pub score: f64,
}

pub(crate) fn display<S: serde::Serializer>(s: &Skeleton, ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_str(s)
}

/// Ranks the enumerated grammar for masked questions.
#[derive(Debug, Clone)]
pub struct Proposer {
    skeletons: Vec<Skeleton>,
}

impl Proposer {
    pub fn new(max_hops: usize) -> Proposer {
        Proposer {
            skeletons: enumerate_skeletons(max_hops, &all_operators()),
        }
    }

    pub fn skeletons(&self) -> &[Skeleton] {
        &self.skeletons
    }

    /// Top-1 plus, when the rule applies, its augmentation; otherwise the
    /// runner-up. Only skeletons with one `<entity>` per masked mention are
    /// considered.
    pub fn propose(
        &self,
        masked_question: &str,
        scorer: &dyn SkeletonScorer,
    ) -> Result<Vec<SkeletonCandidate>, ScorerError> {
        let mentions = masked_question.matches("<entity").count();
        let mut scored = Vec::new();
        for (i, sk) in self.skeletons.iter().enumerate() {
            if sk.count(Placeholder::Entity) != mentions {
                continue;
            }
            scored.push((scorer.score(masked_question, sk)?, i));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let Some(&(top_score, top)) = scored.first() else {
            return Ok(Vec::new());
        };
        let top1 = self.skeletons[top].clone();
        let mut out = vec![SkeletonCandidate {
            skeleton: top1.clone(),
            score: top_score,
        }];
        if let Some(aug) = rule_augment(&top1) {
            let score = scorer.score(masked_question, &aug)?;
            out.push(SkeletonCandidate {
                skeleton: aug.canonical(),
                score,
            });
        } else if let Some(&(score, i)) = scored.get(1) {
            out.push(SkeletonCandidate {
                skeleton: self.skeletons[i].clone(),
                score,
            });
        }
        Ok(out)
    }
}

impl Default for Proposer {
    fn default() -> Self {
        Proposer::new(4)
    }
}
