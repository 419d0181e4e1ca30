//! Answer F1 and generalization-split labels.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::logical_form::{to_query_graph, SExpr};

/// `2PR / (P + R)`; both empty scores 1, exactly one empty scores 0.
pub fn answer_f1(pred: &BTreeSet<String>, gold: &BTreeSet<String>) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let hit = pred.intersection(gold).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let p = hit / pred.len() as f64;
    let r = hit / gold.len() as f64;
    2.0 * p * r / (p + r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Iid,
    Compositional,
    ZeroShot,
}

impl SplitLabel {
    pub const ALL: [SplitLabel; 3] = [SplitLabel::Iid, SplitLabel::Compositional, SplitLabel::ZeroShot];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Iid => "iid",
            SplitLabel::Compositional => "compositional",
            SplitLabel::ZeroShot => "zero_shot",
        }
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Relations and classes of an expression.
pub fn components_of(expr: &SExpr) -> BTreeSet<String> {
    expr.relations()
        .into_iter()
        .chain(expr.classes())
        .map(String::from)
        .collect()
}

/// Adjacent component pairs of the query graph: a class with every
/// relation touching its node, and two relations sharing a node. Pairs are
/// stored sorted.
pub fn compositions_of(expr: &SExpr) -> BTreeSet<(String, String)> {
    let Ok(g) = to_query_graph(expr) else {
        return BTreeSet::new();
    };
    let pair = |a: &str, b: &str| {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    };
    let mut out = BTreeSet::new();
    for (i, (a, r, b)) in g.edges.iter().enumerate() {
        for c in g.nodes[*a].classes.iter().chain(&g.nodes[*b].classes) {
            out.insert(pair(c, r));
        }
        for (x, r2, y) in &g.edges[i + 1..] {
            if [a, b].iter().any(|n| *n == x || *n == y) {
                out.insert(pair(r, r2));
            }
        }
    }
    out
}

/// Components and compositions seen in training.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TrainInventory {
    pub components: BTreeSet<String>,
    pub compositions: BTreeSet<(String, String)>,
}

impl TrainInventory {
    pub fn add(&mut self, expr: &SExpr) {
        self.components.extend(components_of(expr));
        self.compositions.extend(compositions_of(expr));
    }

    /// Inventory of the parseable golds of `items`.
    pub fn from_items(items: &[super::DatasetItem]) -> TrainInventory {
        let mut inv = TrainInventory::default();
        for item in items {
            match item.gold() {
                Ok(g) => inv.add(&g),
                Err(e) => log::warn!("training item {} skipped: {e}", item.qid),
            }
        }
        inv
    }
}

/// Zero-shot if a component is unseen, else compositional if a composition
/// is unseen, else iid.
pub fn classify_split(expr: &SExpr, train: &TrainInventory) -> SplitLabel {
    if !components_of(expr).is_subset(&train.components) {
        SplitLabel::ZeroShot
    } else if !compositions_of(expr).is_subset(&train.compositions) {
        SplitLabel::Compositional
    } else {
        SplitLabel::Iid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn f1_examples() {
        assert_eq!(answer_f1(&set(&["a", "b"]), &set(&["b", "c"])), 0.5);
        assert_eq!(answer_f1(&set(&["a"]), &set(&["a"])), 1.0);
        assert_eq!(answer_f1(&set(&[]), &set(&["x"])), 0.0);
        assert_eq!(answer_f1(&set(&[]), &set(&[])), 1.0);
        assert_eq!(answer_f1(&set(&["a"]), &set(&["b"])), 0.0);
    }

    #[test]
    fn split_examples() {
        let e = |s: &str| SExpr::parse(s).unwrap();
        let mut train = TrainInventory::default();
        train.add(&e("(AND c1 (JOIN r1 m.a))"));
        train.add(&e("(AND c2 (JOIN r2 m.b))"));
        assert_eq!(classify_split(&e("(AND c1 (JOIN r1 m.z))"), &train), SplitLabel::Iid);
        assert_eq!(classify_split(&e("(AND c1 (JOIN r2 m.b))"), &train), SplitLabel::Compositional);
        assert_eq!(classify_split(&e("(AND c1 (JOIN r9 m.b))"), &train), SplitLabel::ZeroShot);
        // reverse orientation is the same composition
        assert_eq!(
            compositions_of(&e("(AND c1 (JOIN (R r1) m.a))")),
            [("c1".to_string(), "r1".to_string())].into_iter().collect()
        );
        let chain = compositions_of(&e("(AND c1 (JOIN r1 (JOIN r2 m.a)))"));
        assert!(chain.contains(&("r1".to_string(), "r2".to_string())));
        assert!(!chain.contains(&("c1".to_string(), "r2".to_string())));
    }
}
