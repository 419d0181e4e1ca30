//! Bottom-up execution against a naive set-comprehension oracle.

use std::collections::BTreeSet;

use fc_kbqa::exec::{execute, Answer, ExecError};
use fc_kbqa::kb::{KnowledgeBase, Value};
use fc_kbqa::logical_form::{Literal, Operator, SExpr};
use fc_kbqa::synth::{random_kb, SynthConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

type Pairs = BTreeSet<(Value, Value)>;

fn triples(kb: &KnowledgeBase) -> Vec<(Value, String, Value)> {
    let mut out = Vec::new();
    for f in kb.facts() {
        out.push((Value::Entity(f.subject.clone()), f.relation.clone(), f.object.clone()));
        if let (Some(rev), Value::Entity(_)) = (kb.reverse(&f.relation).unwrap(), &f.object) {
            out.push((f.object.clone(), rev.to_string(), Value::Entity(f.subject.clone())));
        }
    }
    out
}

fn pairs(path: &SExpr, t: &[(Value, String, Value)]) -> Pairs {
    match path {
        SExpr::Node(Operator::R, a) => pairs(&a[0], t).into_iter().map(|(x, y)| (y, x)).collect(),
        SExpr::Node(Operator::Join, a) => {
            let left = pairs(&a[0], t);
            let right = pairs(&a[1], t);
            let mut out = Pairs::new();
            for (x, y) in &left {
                for (y2, z) in &right {
                    if y == y2 {
                        out.insert((x.clone(), z.clone()));
                    }
                }
            }
            out
        }
        leaf => {
            let r = leaf.to_string();
            t.iter().filter(|(_, rel, _)| *rel == r).map(|(s, _, o)| (s.clone(), o.clone())).collect()
        }
    }
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Literal(l) => l.numeric(),
        _ => None,
    }
}

fn oracle(e: &SExpr, kb: &KnowledgeBase, t: &[(Value, String, Value)]) -> Option<BTreeSet<Value>> {
    use fc_kbqa::logical_form::Leaf;
    Some(match e {
        SExpr::Leaf(Leaf::Class(c)) => kb
            .memberships()
            .iter()
            .filter(|(_, k)| k == c)
            .map(|(x, _)| Value::Entity(x.clone()))
            .collect(),
        SExpr::Leaf(Leaf::Entity(x)) => [Value::Entity(x.clone())].into(),
        SExpr::Leaf(Leaf::Literal(l)) => [Value::literal(l)].into(),
        SExpr::Node(Operator::And, a) => {
            let x = oracle(&a[0], kb, t)?;
            let y = oracle(&a[1], kb, t)?;
            x.intersection(&y).cloned().collect()
        }
        SExpr::Node(Operator::Join, a) => {
            let objs = oracle(&a[1], kb, t)?;
            pairs(&a[0], t).into_iter().filter(|(_, o)| objs.contains(o)).map(|(s, _)| s).collect()
        }
        SExpr::Node(op, a) if op.is_superlative() => {
            let dom = oracle(&a[0], kb, t)?;
            let p = pairs(&a[1], t);
            let scored: Vec<(Value, f64)> = p
                .iter()
                .filter(|(x, _)| dom.contains(x))
                .filter_map(|(x, v)| num(v).map(|n| (x.clone(), n)))
                .collect();
            let best = scored.iter().map(|(_, n)| *n).reduce(|a, b| {
                if *op == Operator::ArgMax { a.max(b) } else { a.min(b) }
            })?;
            scored.into_iter().filter(|(_, n)| *n == best).map(|(x, _)| x).collect()
        }
        SExpr::Node(op, a) if op.is_comparison() => {
            let SExpr::Leaf(Leaf::Literal(l)) = &a[1] else { return None };
            let b = l.numeric()?;
            pairs(&a[0], t)
                .into_iter()
                .filter(|(_, v)| {
                    num(v).is_some_and(|x| match op {
                        Operator::Lt => x < b,
                        Operator::Le => x <= b,
                        Operator::Gt => x > b,
                        _ => x >= b,
                    })
                })
                .map(|(s, _)| s)
                .collect()
        }
        _ => return None,
    })
}

struct Gen<'a> {
    rels: Vec<String>,
    classes: Vec<String>,
    ents: Vec<String>,
    _kb: &'a KnowledgeBase,
}

impl Gen<'_> {
    fn path(&self, rng: &mut ChaCha8Rng, depth: usize) -> SExpr {
        let r = SExpr::relation(self.rels.choose(rng).unwrap().clone());
        let r = if rng.gen_bool(0.3) { SExpr::reverse(r) } else { r };
        if depth > 0 && rng.gen_bool(0.25) {
            SExpr::join(r, self.path(rng, depth - 1))
        } else {
            r
        }
    }

    fn set(&self, rng: &mut ChaCha8Rng, depth: usize) -> SExpr {
        if depth == 0 || rng.gen_bool(0.3) {
            return if rng.gen_bool(0.5) {
                SExpr::class(self.classes.choose(rng).unwrap().clone())
            } else {
                SExpr::entity(self.ents.choose(rng).unwrap().clone())
            };
        }
        match rng.gen_range(0..6) {
            0 | 1 => SExpr::and(self.set(rng, depth - 1), self.set(rng, depth - 1)),
            2 | 3 => SExpr::join(self.path(rng, 1), self.set(rng, depth - 1)),
            4 => SExpr::node(
                [Operator::ArgMax, Operator::ArgMin][rng.gen_range(0..2)],
                vec![self.set(rng, depth - 1), self.path(rng, 1)],
            ),
            _ => SExpr::node(
                [Operator::Lt, Operator::Le, Operator::Gt, Operator::Ge][rng.gen_range(0..4)],
                vec![
                    self.path(rng, 0),
                    SExpr::literal(Literal::new(rng.gen_range(0..50).to_string(), "float")),
                ],
            ),
        }
    }
}

fn setup(seed: u64) -> KnowledgeBase {
    let cfg = SynthConfig { facts: 200, relations: 10, entities: 25, literal_prob: 0.3, ..SynthConfig::default() };
    random_kb(seed, &cfg)
}

fn generator(kb: &KnowledgeBase) -> Gen<'_> {
    Gen {
        rels: kb.relations().map(|r| r.id.clone()).collect(),
        classes: kb.classes().map(|c| c.id.clone()).collect(),
        ents: kb.entities().map(|e| e.id.clone()).collect(),
        _kb: kb,
    }
}

#[test]
fn execution_agrees_with_naive_oracle() {
    let mut nonempty = 0;
    for seed in 0..40 {
        let kb = setup(seed);
        let t = triples(&kb);
        let g = generator(&kb);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let e = g.set(&mut rng, 4);
            let got = execute(&e, &kb);
            match (got, oracle(&e, &kb, &t)) {
                (Ok(Answer::Values(v)), Some(o)) => {
                    nonempty += usize::from(!v.is_empty());
                    assert_eq!(v, o, "{e}");
                }
                (Err(ExecError::EmptyDomain(_)), None) => {}
                (got, want) => panic!("{e}: {got:?} vs {want:?}"),
            }
        }
    }
    assert!(nonempty > 100, "too few non-empty answers ({nonempty})");
}

#[test]
fn conjunction_is_intersection_and_reverse_flips() {
    for seed in 100..130 {
        let kb = setup(seed);
        let t = triples(&kb);
        let g = generator(&kb);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..30 {
            let a = g.set(&mut rng, 2);
            let b = g.set(&mut rng, 2);
            let (Ok(Answer::Values(x)), Ok(Answer::Values(y))) = (execute(&a, &kb), execute(&b, &kb)) else {
                continue;
            };
            let Ok(Answer::Values(both)) = execute(&SExpr::and(a, b), &kb) else { panic!() };
            assert_eq!(both, x.intersection(&y).cloned().collect());

            let r = g.rels.choose(&mut rng).unwrap().clone();
            let flipped = SExpr::join(SExpr::reverse(SExpr::relation(r.clone())), SExpr::class(g.classes[0].clone()));
            let Ok(Answer::Values(got)) = execute(&flipped, &kb) else { panic!() };
            let members = oracle(&SExpr::class(g.classes[0].clone()), &kb, &t).unwrap();
            let want: BTreeSet<Value> = t
                .iter()
                .filter(|(s, rel, _)| *rel == r && members.contains(s))
                .map(|(_, _, o)| o.clone())
                .collect();
            assert_eq!(got, want);
        }
    }
}

#[test]
fn count_is_cardinality() {
    let kb = setup(3);
    let g = generator(&kb);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let e = g.set(&mut rng, 3);
        if let Ok(Answer::Values(v)) = execute(&e, &kb) {
            assert_eq!(execute(&SExpr::count(e), &kb).unwrap(), Answer::Count(v.len()));
        }
    }
}
