//! Query graphs and exact-match comparison.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Leaf, Operator, SExpr};

/// Relation label on a directed edge (always in forward orientation).
pub type EdgeLabel = String;

/// A node of the query graph. Nodes bound to the same entity or literal
/// are merged into one.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GraphNode {
    /// Entity ids or literal value keys this node is bound to.
    pub constants: BTreeSet<String>,
    /// Class constraints (and skeleton placeholder labels).
    pub classes: BTreeSet<String>,
    /// Function marks: `COUNT`, `ARGMAX`, `ARGMIN`, or `LT <value>`, ...
    pub marks: BTreeSet<String>,
}

/// Graph view of a logical form. Equality is decided by the canonical key.
#[derive(Debug, Clone, Serialize)]
pub struct QueryGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(usize, EdgeLabel, usize)>,
    pub answer: usize,
    key: String,
}

impl QueryGraph {
    /// Deterministic serialization shared by all equivalent expressions.
    pub fn canonical_key(&self) -> &str {
        &self.key
    }
}

impl PartialEq for QueryGraph {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for QueryGraph {}

struct Builder {
    nodes: Vec<GraphNode>,
    edges: Vec<(usize, EdgeLabel, usize)>,
}

impl Builder {
    fn fresh(&mut self) -> usize {
        self.nodes.push(GraphNode::default());
        self.nodes.len() - 1
    }

    /// Adds the edge for one path step leaving `from`; returns the far node.
    fn step(&mut self, from: usize, step: &SExpr) -> usize {
        let to = self.fresh();
        match step {
            SExpr::Node(Operator::R, args) => {
                self.edges.push((to, leaf_label(&args[0]), from));
            }
            other => self.edges.push((from, leaf_label(other), to)),
        }
        to
    }

    fn path(&mut self, from: usize, path: &SExpr) -> usize {
        match path {
            SExpr::Node(Operator::Join, args) => {
                let mid = self.step(from, &args[0]);
                self.path(mid, &args[1])
            }
            step => self.step(from, step),
        }
    }

    fn set(&mut self, node: usize, expr: &SExpr) {
        match expr {
            SExpr::Leaf(Leaf::Class(c)) => {
                self.nodes[node].classes.insert(c.clone());
            }
            SExpr::Leaf(Leaf::Entity(e)) => {
                self.nodes[node].constants.insert(e.clone());
            }
            SExpr::Leaf(Leaf::Literal(l)) => {
                self.nodes[node].constants.insert(format!("lit:{}", l.key()));
            }
            SExpr::Leaf(leaf) => {
                self.nodes[node].classes.insert(leaf.to_string());
            }
            SExpr::Node(Operator::And, args) => {
                self.set(node, &args[0]);
                self.set(node, &args[1]);
            }
            SExpr::Node(Operator::Join, args) => {
                let obj = self.path(node, &args[0]);
                self.set(obj, &args[1]);
            }
            SExpr::Node(Operator::Count, args) => {
                self.set(node, &args[0]);
                self.nodes[node].marks.insert("COUNT".into());
            }
            SExpr::Node(op, args) if op.is_superlative() => {
                self.set(node, &args[0]);
                let value = self.path(node, &args[1]);
                self.nodes[value].marks.insert(op.tag().into());
            }
            SExpr::Node(op, args) if op.is_comparison() => {
                let value = self.path(node, &args[0]);
                let bound = match &args[1] {
                    SExpr::Leaf(Leaf::Literal(l)) => l.key(),
                    other => other.to_string(),
                };
                self.nodes[value].marks.insert(format!("{} {}", op.tag(), bound));
            }
            SExpr::Node(_, args) => args.iter().for_each(|a| self.set(node, a)),
        }
    }

    /// Merges nodes bound to identical constant sets and renumbers.
    fn finish(self, key: String) -> QueryGraph {
        let mut repr: Vec<usize> = (0..self.nodes.len()).collect();
        let mut by_const: BTreeMap<BTreeSet<String>, usize> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.constants.is_empty() {
                repr[i] = *by_const.entry(n.constants.clone()).or_insert(i);
            }
        }
        let mut index = BTreeMap::new();
        let mut nodes: Vec<GraphNode> = Vec::new();
        for (i, n) in self.nodes.into_iter().enumerate() {
            let r = repr[i];
            let slot = *index.entry(r).or_insert_with(|| {
                nodes.push(GraphNode::default());
                nodes.len() - 1
            });
            let target = &mut nodes[slot];
            target.constants.extend(n.constants);
            target.classes.extend(n.classes);
            target.marks.extend(n.marks);
        }
        let mut edges: Vec<_> = self
            .edges
            .into_iter()
            .map(|(a, l, b)| (index[&repr[a]], l, index[&repr[b]]))
            .collect();
        edges.sort();
        edges.dedup();
        QueryGraph {
            nodes,
            edges,
            answer: index[&repr[0]],
            key,
        }
    }
}

fn leaf_label(expr: &SExpr) -> String {
    expr.to_string()
}

/// Builds the canonical query graph of a well-formed expression.
pub fn to_query_graph(expr: &SExpr) -> Result<QueryGraph, super::FormError> {
    expr.validate()?;
    let canon = expr.normalize();
    let mut b = Builder {
        nodes: vec![GraphNode::default()],
        edges: Vec::new(),
    };
    b.set(0, &canon);
    Ok(b.finish(canon.to_string()))
}

/// True iff both expressions have the same canonical query graph.
/// Malformed expressions never match.
pub fn exact_match(a: &SExpr, b: &SExpr) -> bool {
    match (to_query_graph(a), to_query_graph(b)) {
        (Ok(ga), Ok(gb)) => ga == gb,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logical_form::Literal;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> SExpr {
        SExpr::parse(s).unwrap()
    }

    #[test]
    fn and_is_order_independent() {
        let a = to_query_graph(&p("(AND A (JOIN r m.x))")).unwrap();
        let b = to_query_graph(&p("(AND (JOIN r m.x) A)")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.canonical_key(), b.canonical_key());
    }

    #[test]
    fn reverse_flips_orientation() {
        let fwd = to_query_graph(&p("(JOIN r m.e)")).unwrap();
        let rev = to_query_graph(&p("(JOIN (R r) m.e)")).unwrap();
        assert_ne!(fwd, rev);
        assert_eq!(fwd.edges, vec![(0, "r".to_string(), 1)]);
        assert_eq!(rev.edges, vec![(1, "r".to_string(), 0)]);
    }

    #[test]
    fn exact_match_cases() {
        let x = p("(AND c (JOIN r1 (JOIN r2 m.z)))");
        assert!(exact_match(&x, &x));
        assert!(exact_match(
            &p("(AND c (AND (JOIN a m.1) (JOIN b m.2)))"),
            &p("(AND (AND (JOIN b m.2) c) (JOIN a m.1))")
        ));
        assert!(!exact_match(&x, &p("(AND c (JOIN r1 (JOIN r3 m.z)))")));
        assert!(exact_match(
            &p("(JOIN (JOIN r1 r2) m.z)"),
            &p("(JOIN r1 (JOIN r2 m.z))")
        ));
    }

    #[test]
    fn shared_entities_merge_into_one_node() {
        let g = to_query_graph(&p("(AND (JOIN a m.e) (JOIN b m.e))")).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 2);
    }

    // Random expressions over a tiny vocabulary so that collisions happen.
    fn random_rel(rng: &mut ChaCha8Rng) -> SExpr {
        let r = SExpr::relation(["r.a", "r.b"][rng.gen_range(0..2)]);
        if rng.gen_bool(0.3) {
            SExpr::reverse(r)
        } else {
            r
        }
    }

    fn random_set(rng: &mut ChaCha8Rng, budget: &mut usize) -> SExpr {
        if *budget == 0 || rng.gen_bool(0.35) {
            return match rng.gen_range(0..3) {
                0 => SExpr::class(["c.x", "c.y"][rng.gen_range(0..2)]),
                1 => SExpr::entity(["m.1", "m.2"][rng.gen_range(0..2)]),
                _ => SExpr::literal(Literal::new("7", "int")),
            };
        }
        *budget -= 1;
        if rng.gen_bool(0.5) {
            let a = random_set(rng, budget);
            let b = random_set(rng, budget);
            SExpr::and(a, b)
        } else {
            let r = random_rel(rng);
            let x = random_set(rng, budget);
            SExpr::join(r, x)
        }
    }

    /// Label-preserving isomorphism with the answer node fixed, by trying
    /// every node permutation.
    fn brute_force_isomorphic(a: &QueryGraph, b: &QueryGraph) -> bool {
        if a.nodes.len() != b.nodes.len() || a.edges.len() != b.edges.len() {
            return false;
        }
        let n = a.nodes.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let target: BTreeSet<_> = b.edges.iter().cloned().collect();
        loop {
            if perm[a.answer] == b.answer
                && (0..n).all(|i| a.nodes[i] == b.nodes[perm[i]])
                && a
                    .edges
                    .iter()
                    .map(|(x, l, y)| (perm[*x], l.clone(), perm[*y]))
                    .collect::<BTreeSet<_>>()
                    == target
            {
                return true;
            }
            if !next_permutation(&mut perm) {
                return false;
            }
        }
    }

    fn next_permutation(v: &mut [usize]) -> bool {
        let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
            return false;
        };
        let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
        v.swap(i - 1, j);
        v[i..].reverse();
        true
    }

    #[test]
    fn canonical_keys_agree_with_brute_force_isomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut graphs = Vec::new();
        while graphs.len() < 150 {
            let mut budget = 3;
            let e = random_set(&mut rng, &mut budget);
            let g = to_query_graph(&e).unwrap();
            if g.nodes.len() <= 6 && !g.edges.is_empty() {
                graphs.push((e, g));
            }
        }
        let mut equal_pairs = 0;
        for (i, (ea, ga)) in graphs.iter().enumerate() {
            for (eb, gb) in &graphs[i + 1..] {
                let iso = brute_force_isomorphic(ga, gb);
                assert_eq!(iso, ga == gb, "{ea} vs {eb}");
                equal_pairs += usize::from(iso);
            }
        }
        assert!(equal_pairs > 0, "generator produced no equivalent pairs");
    }
}
