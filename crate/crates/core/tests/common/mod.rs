//! Naive oracles and random trial generators shared by the integration
//! and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use fc_kbqa::composer::{Component, ComponentCandidates, ComponentScores, SlotPlan};
use fc_kbqa::exec::is_executable;
use fc_kbqa::kb::{is_literal_class, KnowledgeBase, Value};
use fc_kbqa::logical_form::{Literal, Placeholder};
use fc_kbqa::midgrain::{ClassRelPair, DirRel, PairSets, RelEntityPair, RelRelPair};
use fc_kbqa::retrieval::ScoredCandidate;
use fc_kbqa::skeleton::{all_operators, enumerate_skeletons, SkeletonCandidate};
use fc_kbqa::synth::{random_kb, SynthConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Every fact with declared reverses materialized.
pub fn triples(kb: &KnowledgeBase) -> Vec<(String, String, Value)> {
    let mut out = Vec::new();
    for f in kb.facts() {
        out.push((f.subject.clone(), f.relation.clone(), f.object.clone()));
        if let (Some(rev), Value::Entity(o)) = (kb.reverse(&f.relation).unwrap(), &f.object) {
            out.push((o.clone(), rev.to_string(), Value::Entity(f.subject.clone())));
        }
    }
    out
}

/// `(subject, object)` pairs of a traversal.
fn walk(d: &DirRel, t: &[(String, String, Value)]) -> Vec<(Value, Value)> {
    t.iter()
        .filter(|(_, r, _)| *r == d.relation)
        .map(|(s, _, o)| {
            let s = Value::Entity(s.clone());
            if d.is_reverse() {
                (o.clone(), s)
            } else {
                (s, o.clone())
            }
        })
        .collect()
}

fn traversals(r_q: &[String], kb: &KnowledgeBase) -> Vec<DirRel> {
    let mut out = Vec::new();
    for r in r_q {
        let Some(info) = kb.relation(r) else { continue };
        out.push(DirRel::forward(r.clone()));
        if !is_literal_class(&info.range) {
            out.push(DirRel::reverse(r.clone()));
        }
    }
    out
}

/// Nested loops over candidates and facts.
pub fn oracle_pairs(
    c_q: &[String],
    r_q: &[String],
    e_q: &[String],
    need_entities: bool,
    kb: &KnowledgeBase,
    ontology_only_rr: bool,
) -> PairSets {
    let t = triples(kb);
    let ds = traversals(r_q, kb);
    let dom = |d: &DirRel| {
        let i = kb.relation(&d.relation).unwrap();
        if d.is_reverse() { i.range.clone() } else { i.domain.clone() }
    };
    let ran = |d: &DirRel| {
        let i = kb.relation(&d.relation).unwrap();
        if d.is_reverse() { i.domain.clone() } else { i.range.clone() }
    };
    let mut out = PairSets::default();
    for c in c_q {
        for d in &ds {
            if dom(d) == *c {
                out.class_relation.insert(ClassRelPair {
                    class: c.clone(),
                    relation: d.clone(),
                });
            }
        }
    }
    for d1 in &ds {
        for d2 in &ds {
            if ran(d1) != dom(d2) || is_literal_class(&ran(d1)) {
                continue;
            }
            let flip = d1.relation == d2.relation && d1.direction != d2.direction;
            let rev = kb.reverse(&d1.relation).unwrap() == Some(d2.relation.as_str()) && d1.direction == d2.direction;
            if flip || rev {
                continue;
            }
            let witnessed = ontology_only_rr || {
                let a = walk(d1, &t);
                let b = walk(d2, &t);
                a.iter().any(|(_, m)| b.iter().any(|(m2, _)| m == m2))
            };
            if witnessed {
                out.relation_relation.insert(RelRelPair {
                    first: d1.clone(),
                    second: d2.clone(),
                });
            }
        }
    }
    if need_entities {
        for e in e_q {
            for d in &ds {
                let v = Value::Entity(e.clone());
                if walk(d, &t).iter().any(|(_, o)| *o == v) {
                    out.relation_entity.insert(RelEntityPair {
                        relation: d.clone(),
                        entity: e.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Small KBs for the composer oracle.
pub fn small_kb_config() -> SynthConfig {
    SynthConfig {
        domains: 2,
        classes_per_domain: 3,
        relations: 14,
        entities: 24,
        facts: 150,
        reverse_prob: 0.3,
        literal_prob: 0.2,
    }
}

/// Random fine-grained candidates drawn from a KB: up to `max_rel`
/// relations, a few classes, entities and literals, and three skeletons
/// with at most `max_rel_slots` relation slots.
pub fn random_candidates(kb: &KnowledgeBase, rng: &mut ChaCha8Rng, max_rel: usize, max_rel_slots: usize) -> ComponentCandidates {
    let scored = |ids: Vec<String>, rng: &mut ChaCha8Rng| -> Vec<ScoredCandidate> {
        ids.into_iter()
            .enumerate()
            .map(|(i, id)| ScoredCandidate {
                id,
                recall: 0.0,
                semantic: rng.gen_range(0.0..1.0),
                rank: i + 1,
            })
            .collect()
    };
    let rels: Vec<String> = kb.relations().map(|r| r.id.clone()).collect();
    let classes: Vec<String> = kb.classes().map(|c| c.id.clone()).filter(|c| !is_literal_class(c)).collect();
    let ents: Vec<String> = kb.entities().map(|e| e.id.clone()).collect();
    let lits: BTreeSet<Literal> = kb
        .facts()
        .iter()
        .filter_map(|f| match &f.object {
            Value::Literal(l) => Some(l.clone()),
            _ => None,
        })
        .collect();
    let lits: Vec<Literal> = lits.into_iter().collect();

    let nr = rng.gen_range(1..=max_rel.min(rels.len()));
    let r_q: Vec<String> = rels.choose_multiple(rng, nr).cloned().collect();
    let nc = rng.gen_range(1..=4.min(classes.len()));
    let c_q: Vec<String> = classes.choose_multiple(rng, nc).cloned().collect();
    // bias entities towards objects of the chosen relations
    let mut e_q: Vec<String> = Vec::new();
    for f in kb.facts().iter().filter(|f| r_q.contains(&f.relation)) {
        if e_q.len() < 2 && rng.gen_bool(0.2) && !e_q.contains(&f.subject) {
            e_q.push(f.subject.clone());
        }
    }
    if let Some(e) = ents.choose(rng) {
        if !e_q.contains(e) {
            e_q.push(e.clone());
        }
    }
    let nl = rng.gen_range(0..=2.min(lits.len()));
    let literals: Vec<Literal> = lits.choose_multiple(rng, nl).cloned().collect();

    let pool: Vec<_> = enumerate_skeletons(max_rel_slots, &all_operators())
        .into_iter()
        .filter(|s| s.relation_count() <= max_rel_slots && s.count(Placeholder::Entity) <= 2 && s.count(Placeholder::Literal) <= 1)
        .collect();
    let skeletons = pool
        .choose_multiple(rng, 3)
        .map(|s| SkeletonCandidate {
            skeleton: s.clone(),
            score: rng.gen_range(-2.0..0.0),
        })
        .collect();
    ComponentCandidates {
        relations: scored(r_q, rng),
        classes: scored(c_q, rng),
        entities: e_q,
        literals,
        skeletons,
    }
}

pub fn random_trial(seed: u64) -> (KnowledgeBase, ComponentCandidates) {
    let kb = random_kb(seed, &small_kb_config());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let c = random_candidates(&kb, &mut rng, 6, 2);
    (kb, c)
}

/// The constraint each slot must satisfy, stated directly over the pair
/// sets.
pub fn fill_ok(plan: &SlotPlan, fill: &[Component], pairs: &PairSets, c: &ComponentCandidates) -> bool {
    plan.slots.iter().enumerate().all(|(i, slot)| {
        let ctx = slot.context.map(|j| &fill[j]);
        let fresh = !fill[..i].contains(&fill[i]);
        match (&fill[i], slot.kind) {
            (Component::Class(k), Placeholder::Class) => pairs.class_relation.iter().any(|p| p.class == *k),
            (Component::Relation(d), Placeholder::Rel) => match ctx {
                Some(Component::Class(k)) => pairs.class_relation.contains(&ClassRelPair {
                    class: k.clone(),
                    relation: d.clone(),
                }),
                Some(Component::Relation(d0)) => pairs.relation_relation.contains(&RelRelPair {
                    first: d0.clone(),
                    second: d.clone(),
                }),
                _ => pairs.relations().contains(d),
            },
            (Component::Entity(e), Placeholder::Entity) => {
                fresh
                    && c.entities.contains(e)
                    && match ctx {
                        Some(Component::Relation(d)) => pairs.relation_entity.contains(&RelEntityPair {
                            relation: d.clone(),
                            entity: e.clone(),
                        }),
                        _ => true,
                    }
            }
            (Component::Literal(l), Placeholder::Literal) => fresh && c.literals.contains(l),
            _ => false,
        }
    })
}

/// Best score over the full cartesian product of per-slot components that
/// satisfies every constraint and executes.
pub fn brute_force_best(c: &ComponentCandidates, pairs: &PairSets, kb: &KnowledgeBase, temperature: f64) -> Option<f64> {
    let scores = ComponentScores::new(c, temperature);
    let rels: Vec<Component> = traversals(&c.relation_ids(), kb).into_iter().map(Component::Relation).collect();
    let classes: Vec<Component> = c.class_ids().into_iter().map(Component::Class).collect();
    let ents: Vec<Component> = c.entities.iter().cloned().map(Component::Entity).collect();
    let lits: Vec<Component> = c.literals.iter().cloned().map(Component::Literal).collect();
    let mut best: Option<f64> = None;
    for sc in &c.skeletons {
        let plan = SlotPlan::of(&sc.skeleton);
        let domains: Vec<&Vec<Component>> = plan
            .slots
            .iter()
            .map(|s| match s.kind {
                Placeholder::Rel => &rels,
                Placeholder::Class => &classes,
                Placeholder::Entity => &ents,
                Placeholder::Literal => &lits,
            })
            .collect();
        let mut idx = vec![0usize; domains.len()];
        if domains.iter().any(|d| d.is_empty()) {
            continue;
        }
        loop {
            let fill: Vec<Component> = idx.iter().zip(&domains).map(|(i, d)| d[*i].clone()).collect();
            if fill_ok(&plan, &fill, pairs, c) && is_executable(&plan.instantiate(&fill), kb) {
                let s = fill.iter().fold(sc.score, |acc, x| acc + scores.of(x));
                if best.is_none_or(|b| s > b) {
                    best = Some(s);
                }
            }
            // odometer increment
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < domains[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    best
}

use fc_kbqa::logical_form::{Leaf, Operator, SExpr};

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn random_path(rng: &mut ChaCha8Rng) -> SExpr {
    let r = SExpr::relation(pick(rng, &["r.a", "r.b", "r.c", "r.d"]));
    match rng.gen_range(0..5) {
        0 => SExpr::reverse(r),
        1 => SExpr::join(r, SExpr::relation(pick(rng, &["r.e", "r.f"]))),
        _ => r,
    }
}

fn random_set(rng: &mut ChaCha8Rng, depth: usize) -> SExpr {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..2) {
            0 => SExpr::class(pick(rng, &["c.x", "c.y", "c.z"])),
            _ => SExpr::entity(pick(rng, &["m.1", "m.2", "m.3", "m.4"])),
        };
    }
    match rng.gen_range(0..10) {
        0..=3 => SExpr::and(random_set(rng, depth - 1), random_set(rng, depth - 1)),
        4..=7 => SExpr::join(random_path(rng), random_set(rng, depth - 1)),
        8 => {
            let op = [Operator::Lt, Operator::Le, Operator::Gt, Operator::Ge][rng.gen_range(0..4)];
            let lit = Literal::new(rng.gen_range(0..20).to_string(), "int");
            SExpr::Node(op, vec![random_path(rng), SExpr::literal(lit)])
        }
        _ => {
            let op = [Operator::ArgMax, Operator::ArgMin][rng.gen_range(0..2)];
            SExpr::Node(op, vec![random_set(rng, depth - 1), random_path(rng)])
        }
    }
}

/// A random well-formed expression, sometimes under `COUNT`.
pub fn random_expression(rng: &mut ChaCha8Rng) -> SExpr {
    let e = random_set(rng, 4);
    if rng.gen_bool(0.15) {
        SExpr::count(e)
    } else {
        e
    }
}

/// Random commutative (and associative) rewrite of every conjunction.
pub fn permute(e: &SExpr, rng: &mut ChaCha8Rng) -> SExpr {
    match e {
        SExpr::Leaf(_) => e.clone(),
        SExpr::Node(Operator::And, a) => {
            let x = permute(&a[0], rng);
            let y = permute(&a[1], rng);
            // (AND x (AND p q)) may become (AND (AND x p) q)
            if let (true, SExpr::Node(Operator::And, inner)) = (rng.gen_bool(0.3), &y) {
                return SExpr::and(SExpr::and(x, inner[0].clone()), inner[1].clone());
            }
            if rng.gen_bool(0.5) {
                SExpr::and(y, x)
            } else {
                SExpr::and(x, y)
            }
        }
        SExpr::Node(op, a) => SExpr::Node(*op, a.iter().map(|x| permute(x, rng)).collect()),
    }
}

pub fn leaf_count(e: &SExpr) -> usize {
    e.leaves().len()
}

/// `e` with leaf `k` (pre-order) replaced by a fresh leaf of the same kind.
pub fn mutate_leaf(e: &SExpr, k: usize) -> SExpr {
    let mut i = 0;
    e.map_leaves(&mut |l| {
        let hit = i == k;
        i += 1;
        if !hit {
            return l.clone();
        }
        match l {
            Leaf::Relation(r) => Leaf::Relation(format!("{r}_mut")),
            Leaf::Class(c) => Leaf::Class(format!("{c}_mut")),
            Leaf::Entity(x) => Leaf::Entity(format!("{x}_mut")),
            Leaf::Literal(v) => Leaf::Literal(Literal::new(format!("{}1", v.lexical), v.datatype.clone())),
            other => other.clone(),
        }
    })
}

/// Random corpus over a small vocabulary: `(id, tokens)`.
pub fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<(String, Vec<String>)> {
    let vocab = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"];
    let n = rng.gen_range(2..12);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..10);
            let toks = (0..len).map(|_| vocab[rng.gen_range(0..vocab.len())].to_string()).collect();
            (format!("d{i}"), toks)
        })
        .collect()
}
