mod common;

use fc_kbqa::retrieval::{bm25_idf, contrastive_loss, Bm25Index, Bm25Params, ComponentIndex, ComponentKind, RetrievalConfig, scorer_by_name};
use fc_kbqa::synth::{random_kb, SynthConfig, WORDS};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn score_of(idx: &Bm25Index, q: &[String], id: &str) -> f64 {
    idx.search(q, Bm25Params::default(), usize::MAX)
        .into_iter()
        .find(|(d, _)| d == id)
        .map_or(0.0, |(_, s)| s)
}

/// Replacing a non-query token of one document with the query term keeps
/// its length and must not lower its score.
pub fn tf_monotone(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = common::random_corpus(&mut rng);
    let term = corpus[0].1[0].clone();
    let q = vec![term.clone()];
    let target = rng.gen_range(0..corpus.len());
    let Some(pos) = corpus[target].1.iter().position(|t| *t != term) else {
        return true;
    };
    let before = {
        let idx = Bm25Index::new(corpus.iter().map(|(i, t)| (i.as_str(), t.clone())));
        score_of(&idx, &q, &corpus[target].0)
    };
    corpus[target].1[pos] = term;
    let idx = Bm25Index::new(corpus.iter().map(|(i, t)| (i.as_str(), t.clone())));
    score_of(&idx, &q, &corpus[target].0) >= before
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn bm25_tf_monotone(seed in any::<u64>()) {
        prop_assert!(tf_monotone(seed));
    }

    #[test]
    fn idf_anti_monotone(n in 1usize..10_000, a in 0usize..10_000, b in 0usize..10_000) {
        let (lo, hi) = (a.min(b).min(n), a.max(b).min(n));
        prop_assert!(bm25_idf(n, lo) >= bm25_idf(n, hi));
        prop_assert!(bm25_idf(n, hi) > 0.0);
    }

    #[test]
    fn contrastive_loss_is_negative_log_softmax(
        pos in -20.0f64..20.0,
        negs in prop::collection::vec(-20.0f64..20.0, 0..48),
    ) {
        let z: f64 = std::iter::once(pos).chain(negs.iter().copied()).map(f64::exp).sum();
        let direct = -(pos.exp() / z).ln();
        prop_assert!((contrastive_loss(pos, &negs) - direct).abs() < 1e-9);
    }
}

#[test]
fn index_idf_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let corpus = common::random_corpus(&mut rng);
        let idx = Bm25Index::new(corpus.iter().map(|(i, t)| (i.as_str(), t.clone())));
        for term in ["alpha", "beta", "zzz"] {
            let df = corpus.iter().filter(|(_, t)| t.iter().any(|x| x == term)).count();
            assert_eq!(idx.doc_freq(term), df);
            assert_eq!(idx.idf(term), bm25_idf(corpus.len(), df));
        }
    }
}

#[test]
fn top_k_defaults_to_ten() {
    let cfg = RetrievalConfig::default();
    assert_eq!((cfg.top_k_relations, cfg.top_k_classes), (10, 10));
    let kb = random_kb(
        5,
        &SynthConfig {
            relations: 60,
            classes_per_domain: 10,
            ..SynthConfig::default()
        },
    );
    let idx = ComponentIndex::build(&kb);
    let scorer = scorer_by_name("tfidf", &kb).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let q: Vec<&str> = WORDS.choose_multiple(&mut rng, 6).copied().collect();
        let q = q.join(" ");
        for kind in [ComponentKind::Relation, ComponentKind::Class] {
            let top = idx.top_k_components(&q, kind, &cfg, scorer.as_ref()).unwrap();
            assert!(top.len() <= 10);
            assert!(top.windows(2).all(|w| w[0].semantic >= w[1].semantic));
        }
    }
}
