//! Middle-grained connectivity pairs built from the fine-grained candidates.
//!
//! A relation may be traversed in either direction; a reversed relation
//! `(R r)` has `range(r)` as its domain. Literal-valued relations are only
//! traversed forward.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kb::{is_literal_class, KnowledgeBase, Value};
use crate::logical_form::{Skeleton, SExpr, Placeholder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Reverse,
}

/// A relation with a traversal direction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DirRel {
    pub relation: String,
    pub direction: Direction,
}

impl DirRel {
    pub fn forward(r: impl Into<String>) -> DirRel {
        DirRel {
            relation: r.into(),
            direction: Direction::Forward,
        }
    }

    pub fn reverse(r: impl Into<String>) -> DirRel {
        DirRel {
            relation: r.into(),
            direction: Direction::Reverse,
        }
    }

    pub fn is_reverse(&self) -> bool {
        self.direction == Direction::Reverse
    }

    pub fn flipped(&self) -> DirRel {
        DirRel {
            relation: self.relation.clone(),
            direction: match self.direction {
                Direction::Forward => Direction::Reverse,
                Direction::Reverse => Direction::Forward,
            },
        }
    }

    /// `r` or `(R r)`.
    pub fn to_expr(&self) -> SExpr {
        let leaf = SExpr::relation(self.relation.clone());
        if self.is_reverse() {
            SExpr::reverse(leaf)
        } else {
            leaf
        }
    }

    /// Subject-side class, or `None` for unknown relations.
    pub fn domain<'k>(&self, kb: &'k KnowledgeBase) -> Option<&'k str> {
        let info = kb.relation(&self.relation)?;
        Some(if self.is_reverse() { &info.range } else { &info.domain })
    }

    pub fn range<'k>(&self, kb: &'k KnowledgeBase) -> Option<&'k str> {
        let info = kb.relation(&self.relation)?;
        Some(if self.is_reverse() { &info.domain } else { &info.range })
    }

    /// Whether some fact has `v` on the object side of this traversal.
    pub fn has_object(&self, v: &Value, kb: &KnowledgeBase) -> bool {
        let Some(edges) = kb.edges(&self.relation) else {
            return false;
        };
        match (self.direction, v) {
            (Direction::Forward, _) => edges.backward.contains_key(v),
            (Direction::Reverse, Value::Entity(e)) => edges.forward.contains_key(e),
            (Direction::Reverse, Value::Literal(_)) => false,
        }
    }

    /// Whether `e` has an outgoing edge along this traversal.
    pub fn has_subject(&self, e: &str, kb: &KnowledgeBase) -> bool {
        let Some(edges) = kb.edges(&self.relation) else {
            return false;
        };
        match self.direction {
            Direction::Forward => edges.forward.contains_key(e),
            Direction::Reverse => edges.backward.contains_key(&Value::Entity(e.to_string())),
        }
    }

    /// Entity objects of this traversal.
    pub fn entity_objects<'k>(&self, kb: &'k KnowledgeBase) -> Box<dyn Iterator<Item = &'k str> + 'k> {
        let Some(edges) = kb.edges(&self.relation) else {
            return Box::new(std::iter::empty());
        };
        match self.direction {
            Direction::Forward => Box::new(edges.backward.keys().filter_map(Value::as_entity)),
            Direction::Reverse => Box::new(edges.forward.keys().map(String::as_str)),
        }
    }
}

impl fmt::Display for DirRel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.direction {
            Direction::Forward => f.write_str(&self.relation),
            Direction::Reverse => write!(f, "(R {})", self.relation),
        }
    }
}

/// The traversals of `r` that make sense: forward always, reverse only for
/// entity-valued relations. Unknown relations yield nothing.
pub fn directions(r: &str, kb: &KnowledgeBase) -> Vec<DirRel> {
    match kb.relation(r) {
        None => {
            log::warn!("candidate relation `{r}` is not in the KB");
            vec![]
        }
        Some(info) if is_literal_class(&info.range) => vec![DirRel::forward(r)],
        Some(_) => vec![DirRel::forward(r), DirRel::reverse(r)],
    }
}

fn directed(r_q: &[String], kb: &KnowledgeBase) -> Vec<DirRel> {
    let ids: BTreeSet<&str> = r_q.iter().map(String::as_str).collect();
    ids.into_iter().flat_map(|r| directions(r, kb)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassRelPair {
    pub class: String,
    pub relation: DirRel,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelRelPair {
    pub first: DirRel,
    pub second: DirRel,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelEntityPair {
    pub relation: DirRel,
    pub entity: String,
}

/// `(c, r, forward)` when `domain(r) = c`, `(c, r, reverse)` when
/// `range(r) = c`.
pub fn build_class_relation_pairs(c_q: &[String], r_q: &[String], kb: &KnowledgeBase) -> BTreeSet<ClassRelPair> {
    let rels = directed(r_q, kb);
    let mut out = BTreeSet::new();
    for c in c_q {
        for d in &rels {
            if d.domain(kb) == Some(c.as_str()) {
                out.insert(ClassRelPair {
                    class: c.clone(),
                    relation: d.clone(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairOptions {
    /// Keep relation pairs that pass the ontology check but have no fact
    /// witness (for incomplete KBs).
    pub ontology_only_rr: bool,
}

/// Directed chains `d1 → d2` with `range(d1) = domain(d2)` and, unless
/// `ontology_only_rr`, some `(a d1 b), (b d2 c)` in the KB. Walking a
/// relation straight back (`r` then `(R r)`) is not a pair.
pub fn build_relation_relation_pairs(
    r_q: &[String],
    kb: &KnowledgeBase,
    opts: PairOptions,
) -> BTreeSet<RelRelPair> {
    let rels = directed(r_q, kb);
    let mut out = BTreeSet::new();
    for d1 in &rels {
        let Some(mid) = d1.range(kb) else { continue };
        if is_literal_class(mid) {
            continue;
        }
        for d2 in &rels {
            if d2.domain(kb) != Some(mid) || is_backtrack(d1, d2, kb) {
                continue;
            }
            if opts.ontology_only_rr || d1.entity_objects(kb).any(|b| d2.has_subject(b, kb)) {
                out.insert(RelRelPair {
                    first: d1.clone(),
                    second: d2.clone(),
                });
            }
        }
    }
    out
}

/// `d2` undoes `d1`: its flip, or the declared reverse in the same sense.
pub fn is_backtrack(d1: &DirRel, d2: &DirRel, kb: &KnowledgeBase) -> bool {
    if *d2 == d1.flipped() {
        return true;
    }
    match kb.reverse(&d1.relation) {
        Ok(Some(rev)) => d2.relation == rev && d2.direction == d1.direction,
        _ => false,
    }
}

/// Whether any skeleton has an `<entity>` slot.
pub fn skeletons_need_entities(l_q: &[Skeleton]) -> bool {
    l_q.iter().any(|s| s.count(Placeholder::Entity) > 0)
}

/// `(d, e)` for each entity `e` found on the object side of a candidate
/// traversal `d`; empty when no skeleton takes an entity.
pub fn build_relation_entity_pairs(
    r_q: &[String],
    e_q: &[String],
    l_q: &[Skeleton],
    kb: &KnowledgeBase,
) -> BTreeSet<RelEntityPair> {
    let mut out = BTreeSet::new();
    if !skeletons_need_entities(l_q) {
        return out;
    }
    let rels = directed(r_q, kb);
    for e in e_q {
        let v = Value::Entity(e.clone());
        for d in &rels {
            if d.has_object(&v, kb) {
                out.insert(RelEntityPair {
                    relation: d.clone(),
                    entity: e.clone(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSets {
    pub class_relation: BTreeSet<ClassRelPair>,
    pub relation_relation: BTreeSet<RelRelPair>,
    pub relation_entity: BTreeSet<RelEntityPair>,
}

impl PairSets {
    pub fn build(
        c_q: &[String],
        r_q: &[String],
        e_q: &[String],
        l_q: &[Skeleton],
        kb: &KnowledgeBase,
        opts: PairOptions,
    ) -> PairSets {
        let ((class_relation, relation_relation), relation_entity) = rayon::join(
            || {
                rayon::join(
                    || build_class_relation_pairs(c_q, r_q, kb),
                    || build_relation_relation_pairs(r_q, kb, opts),
                )
            },
            || build_relation_entity_pairs(r_q, e_q, l_q, kb),
        );
        PairSets {
            class_relation,
            relation_relation,
            relation_entity,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.class_relation.is_empty() && self.relation_relation.is_empty() && self.relation_entity.is_empty()
    }

    pub fn len(&self) -> usize {
        self.class_relation.len() + self.relation_relation.len() + self.relation_entity.len()
    }

    /// Every traversal mentioned by some pair.
    pub fn relations(&self) -> BTreeSet<&DirRel> {
        let mut out: BTreeSet<&DirRel> = self.class_relation.iter().map(|p| &p.relation).collect();
        for p in &self.relation_relation {
            out.insert(&p.first);
            out.insert(&p.second);
        }
        out.extend(self.relation_entity.iter().map(|p| &p.relation));
        out
    }

    pub fn classes(&self) -> BTreeSet<&str> {
        self.class_relation.iter().map(|p| p.class.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::toy_kb;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn railway_pair_is_forward() {
        let kb = toy_kb();
        let p = build_class_relation_pairs(
            &ids(&["railway.railway", "location.location"]),
            &ids(&["rail.railway.terminuses", "rail.railway_terminus.location"]),
            &kb,
        );
        assert!(p.contains(&ClassRelPair {
            class: "railway.railway".into(),
            relation: DirRel::forward("rail.railway.terminuses"),
        }));
        assert!(p.contains(&ClassRelPair {
            class: "location.location".into(),
            relation: DirRel::reverse("rail.railway_terminus.location"),
        }));
        assert_eq!(p.len(), 2);
        let none = build_class_relation_pairs(&ids(&["sports.sport"]), &ids(&["rail.railway.terminuses"]), &kb);
        assert!(none.is_empty());
    }

    #[test]
    fn coach_chain_has_witness() {
        let kb = toy_kb();
        let r_q = ids(&["sports.sports_team.coaches", "sports.sports_team_coach_tenure.coach"]);
        let p = build_relation_relation_pairs(&r_q, &kb, PairOptions::default());
        assert!(p.contains(&RelRelPair {
            first: DirRel::forward("sports.sports_team.coaches"),
            second: DirRel::forward("sports.sports_team_coach_tenure.coach"),
        }));
        // ontology mismatch
        assert!(!p.iter().any(|x| x.first == DirRel::forward("sports.sports_team_coach_tenure.coach")
            && x.second == DirRel::forward("sports.sports_team.coaches")));
        // no walking straight back
        assert!(!p.iter().any(|x| is_backtrack(&x.first, &x.second, &kb)));
    }

    #[test]
    fn entity_pairs_need_entity_skeleton() {
        let kb = toy_kb();
        let r_q = ids(&["rail.railway.terminuses"]);
        let e_q = ids(&["m.antonio_station"]);
        let no_ent = [Skeleton::parse("(ARGMAX <class> <rel>)").unwrap()];
        assert!(build_relation_entity_pairs(&r_q, &e_q, &no_ent, &kb).is_empty());
        let with = [Skeleton::parse("(AND <class> (JOIN <rel> <entity>))").unwrap()];
        let p = build_relation_entity_pairs(&r_q, &e_q, &with, &kb);
        assert_eq!(
            p.into_iter().collect::<Vec<_>>(),
            vec![RelEntityPair {
                relation: DirRel::forward("rail.railway.terminuses"),
                entity: "m.antonio_station".into()
            }]
        );
        let player = build_relation_entity_pairs(&r_q, &ids(&["m.antonio_player"]), &with, &kb);
        assert!(player.is_empty());
    }

    #[test]
    fn pair_sets_serialize() {
        let kb = toy_kb();
        let sk = [Skeleton::parse("(AND <class> (JOIN <rel> <entity>))").unwrap()];
        let p = PairSets::build(
            &ids(&["railway.railway"]),
            &ids(&["rail.railway.terminuses"]),
            &ids(&["m.antonio_station"]),
            &sk,
            &kb,
            PairOptions::default(),
        );
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains(r#"{"class":"railway.railway","relation":{"relation":"rail.railway.terminuses","direction":"forward"}}"#));
        let back: PairSets = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
