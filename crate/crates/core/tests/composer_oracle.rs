mod common;

use fc_kbqa::composer::{compose, satisfies_pairs, ComposeConfig, Outcome, SlotPlan};
use fc_kbqa::exec::is_executable;
use fc_kbqa::midgrain::{PairOptions, PairSets};

fn pairs_for(c: &fc_kbqa::composer::ComponentCandidates, kb: &fc_kbqa::kb::KnowledgeBase) -> PairSets {
    PairSets::build(
        &c.class_ids(),
        &c.relation_ids(),
        &c.entities,
        &c.skeleton_list(),
        kb,
        PairOptions::default(),
    )
}

#[test]
fn ample_beam_reaches_brute_force_optimum() {
    let config = ComposeConfig {
        beam: 1_000_000,
        ..ComposeConfig::default()
    };
    let mut answered = 0;
    for seed in 0..40 {
        let (kb, c) = common::random_trial(seed);
        let pairs = pairs_for(&c, &kb);
        let out = compose(&c, &pairs, &kb, config);
        let want = common::brute_force_best(&c, &pairs, &kb, config.temperature);
        let got = match &out.outcome {
            Outcome::Answer { score, .. } => Some(*score),
            Outcome::Unanswerable => None,
        };
        assert_eq!(got, want, "seed {seed}");
        answered += usize::from(got.is_some());
    }
    assert!(answered >= 10, "only {answered} trials were answerable");
}

#[test]
fn answers_execute_and_satisfy_pairs() {
    for seed in 100..180 {
        let (kb, c) = common::random_trial(seed);
        let pairs = pairs_for(&c, &kb);
        let out = compose(&c, &pairs, &kb, ComposeConfig::default());
        if let Outcome::Answer { expression, skeleton, .. } = &out.outcome {
            assert!(is_executable(expression, &kb), "seed {seed}: {expression}");
            assert!(expression.validate().is_ok());
            let plan = SlotPlan::of(skeleton);
            let fill = fill_of(&plan, expression);
            assert_eq!(&plan.instantiate(&fill), expression);
            assert!(satisfies_pairs(&plan, &fill, &pairs, &c), "seed {seed}: {expression}");
            assert!(common::fill_ok(&plan, &fill, &pairs, &c));
        }
        let last = out.trace_jsonl().lines().last().unwrap().to_string();
        assert!(last.contains("\"event\":\"result\""), "{last}");
    }
}

/// Reads the slot fill back out of an expression built from `plan`.
fn fill_of(plan: &SlotPlan, e: &fc_kbqa::logical_form::SExpr) -> Vec<fc_kbqa::composer::Component> {
    use fc_kbqa::composer::Component;
    use fc_kbqa::logical_form::{Leaf, Operator, SExpr};
    use fc_kbqa::midgrain::DirRel;
    fn go(e: &SExpr, out: &mut Vec<Component>) {
        match e {
            SExpr::Node(Operator::R, a) => match &a[0] {
                SExpr::Leaf(Leaf::Relation(r)) => out.push(Component::Relation(DirRel::reverse(r.clone()))),
                other => go(other, out),
            },
            SExpr::Node(_, a) => a.iter().for_each(|x| go(x, out)),
            SExpr::Leaf(Leaf::Relation(r)) => out.push(Component::Relation(DirRel::forward(r.clone()))),
            SExpr::Leaf(Leaf::Class(c)) => out.push(Component::Class(c.clone())),
            SExpr::Leaf(Leaf::Entity(x)) => out.push(Component::Entity(x.clone())),
            SExpr::Leaf(Leaf::Literal(l)) => out.push(Component::Literal(l.clone())),
            SExpr::Leaf(Leaf::Slot(..)) => {}
        }
    }
    let mut out = Vec::new();
    go(e, &mut out);
    assert_eq!(out.len(), plan.slots.len());
    out
}
