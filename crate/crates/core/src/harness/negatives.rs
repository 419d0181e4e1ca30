//! Same-domain negative sampling for training a contrastive scorer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::kb::{domain_group, KnowledgeBase};
use crate::retrieval::ComponentKind;

use super::DatasetItem;

pub const DEFAULT_NEGATIVES: usize = 48;

/// One gold relation or class with its sampled negatives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NegativeRecord {
    pub qid: String,
    pub question: String,
    pub kind: ComponentKind,
    pub positive: String,
    pub negatives: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Up to `n` negatives per gold relation and class, drawn without
/// replacement from the components sharing its domain group. One RNG seeded
/// with `seed` is used for the whole dataset, so output depends on item
/// order. Items whose gold does not parse are skipped with a warning.
pub fn export_negatives(items: &[DatasetItem], kb: &KnowledgeBase, n: usize, seed: u64) -> Vec<NegativeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let relations: Vec<&str> = kb.relations().map(|r| r.id.as_str()).collect();
    let classes: Vec<&str> = kb.classes().map(|c| c.id.as_str()).collect();
    let mut out = Vec::new();
    for item in items {
        let gold = match item.gold() {
            Ok(g) => g,
            Err(e) => {
                log::warn!("{}: gold does not parse: {e}", item.qid);
                continue;
            }
        };
        let mut positives: Vec<(ComponentKind, &str)> = Vec::new();
        for r in gold.relations() {
            positives.push((ComponentKind::Relation, r));
        }
        for c in gold.classes() {
            positives.push((ComponentKind::Class, c));
        }
        let mut seen = std::collections::BTreeSet::new();
        positives.retain(|p| seen.insert(*p));
        for (kind, pos) in positives {
            let pool = match kind {
                ComponentKind::Relation => &relations,
                ComponentKind::Class => &classes,
            };
            let group = domain_group(pos);
            let others: Vec<&str> = pool
                .iter()
                .copied()
                .filter(|x| *x != pos && domain_group(x) == group)
                .collect();
            let mut negatives: Vec<String> = others.choose_multiple(&mut rng, n).map(|s| s.to_string()).collect();
            negatives.sort();
            let note = (negatives.len() < n).then(|| {
                format!("domain `{group}` has only {} other candidates; wanted {n}", negatives.len())
            });
            out.push(NegativeRecord {
                qid: item.qid.clone(),
                question: item.question.clone(),
                kind,
                positive: pos.to_string(),
                negatives,
                note,
            });
        }
    }
    out
}

pub fn negatives_jsonl(records: &[NegativeRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_kb, SynthConfig};

    fn item(expr: &str) -> DatasetItem {
        DatasetItem {
            qid: "q".into(),
            question: "q?".into(),
            s_expression: expr.into(),
            answers: None,
            domain: None,
        }
    }

    #[test]
    fn same_domain_seeded_and_sized() {
        let cfg = SynthConfig {
            relations: 120,
            ..SynthConfig::default()
        };
        let kb = random_kb(3, &cfg);
        let r = kb.relations().find(|r| !r.range.starts_with("type.")).unwrap();
        let expr = format!("(AND {} (JOIN {} m.e0))", r.domain, r.id);
        let items = vec![item(&expr), item(&expr)];
        let a = export_negatives(&items, &kb, DEFAULT_NEGATIVES, 7);
        let b = export_negatives(&items, &kb, DEFAULT_NEGATIVES, 7);
        assert_eq!(negatives_jsonl(&a), negatives_jsonl(&b));
        let rel = a.iter().find(|x| x.kind == ComponentKind::Relation).unwrap();
        assert_eq!(rel.negatives.len(), DEFAULT_NEGATIVES);
        assert!(rel.note.is_none());
        assert!(!rel.negatives.contains(&rel.positive));
        for rec in &a {
            let g = domain_group(&rec.positive);
            assert!(rec.negatives.iter().all(|n| domain_group(n) == g));
        }
        // three classes per domain: two negatives and a note
        let cls = a.iter().find(|x| x.kind == ComponentKind::Class).unwrap();
        assert_eq!(cls.negatives.len(), 2);
        assert!(cls.note.is_some());
        // the shared RNG makes the second item's draw differ
        let c = export_negatives(&items, &kb, DEFAULT_NEGATIVES, 8);
        assert_ne!(negatives_jsonl(&a), negatives_jsonl(&c));
    }
}
