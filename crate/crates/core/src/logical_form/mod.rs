//! S-expression logical forms.
//!
//! A logical form is a prefix tree over a fixed operator inventory whose
//! leaves are KB identifiers: relations, classes, entities and typed
//! literals. Leaves are typed by *position*: the first argument of `JOIN`,
//! the only argument of `R`, the second argument of `ARGMAX`/`ARGMIN` and the
//! first argument of a comparison are relation-valued; everything else is
//! set-valued. Inside a relation-valued position `JOIN` composes two
//! relations into a path.
//!
//! ```text
//! (AND railway.railway (JOIN rail.railway.terminuses m.antonio_station))
//! (COUNT (JOIN (R sports.sports_team.coaches) m.fc_ferro))
//! (AND rail.railway (LT rail.railway.length 12.5^^float))
//! ```

mod graph;
mod parse;

use std::fmt;

pub use graph::{exact_match, to_query_graph, EdgeLabel, GraphNode, QueryGraph};
pub use parse::ParseError;

/// Function operators of the s-expression algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    And,
    Join,
    R,
    Count,
    ArgMax,
    ArgMin,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Operator {
    pub const ALL: [Operator; 10] = [
        Operator::And,
        Operator::Join,
        Operator::R,
        Operator::Count,
        Operator::ArgMax,
        Operator::ArgMin,
        Operator::Lt,
        Operator::Le,
        Operator::Gt,
        Operator::Ge,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Operator::And => "AND",
            Operator::Join => "JOIN",
            Operator::R => "R",
            Operator::Count => "COUNT",
            Operator::ArgMax => "ARGMAX",
            Operator::ArgMin => "ARGMIN",
            Operator::Lt => "LT",
            Operator::Le => "LE",
            Operator::Gt => "GT",
            Operator::Ge => "GE",
        }
    }

    /// Case-insensitive lookup (GrailQA writes comparisons in lower case).
    pub fn from_tag(tag: &str) -> Option<Operator> {
        Operator::ALL
            .into_iter()
            .find(|op| op.tag().eq_ignore_ascii_case(tag))
    }

    pub fn arity(self) -> usize {
        match self {
            Operator::R | Operator::Count => 1,
            _ => 2,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            Operator::Lt | Operator::Le | Operator::Gt | Operator::Ge
        )
    }

    pub fn is_superlative(self) -> bool {
        matches!(self, Operator::ArgMax | Operator::ArgMin)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// The value sort expected at a position of the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Set,
    Relation,
    Literal,
}

impl Operator {
    /// Argument sorts of this operator when it occurs at a position of `sort`.
    /// `None` means the operator cannot occur there.
    pub fn signature(self, sort: Sort) -> Option<&'static [Sort]> {
        use Sort::*;
        match (sort, self) {
            (Set, Operator::And) => Some(&[Set, Set]),
            (Set, Operator::Join) => Some(&[Relation, Set]),
            (Set, Operator::Count) => Some(&[Set]),
            (Set, Operator::ArgMax | Operator::ArgMin) => Some(&[Set, Relation]),
            (Set, op) if op.is_comparison() => Some(&[Relation, Literal]),
            (Relation, Operator::R) => Some(&[Relation]),
            (Relation, Operator::Join) => Some(&[Relation, Relation]),
            _ => None,
        }
    }
}

/// Typed placeholder tokens used by logical skeletons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placeholder {
    Rel,
    Class,
    Entity,
    Literal,
}

impl Placeholder {
    pub fn name(self) -> &'static str {
        match self {
            Placeholder::Rel => "rel",
            Placeholder::Class => "class",
            Placeholder::Entity => "entity",
            Placeholder::Literal => "literal",
        }
    }

    fn from_name(name: &str) -> Option<Placeholder> {
        match name {
            "rel" => Some(Placeholder::Rel),
            "class" => Some(Placeholder::Class),
            "entity" => Some(Placeholder::Entity),
            "literal" => Some(Placeholder::Literal),
            _ => None,
        }
    }

    /// Parses `<rel>`, `<entity0>`, ... into the kind and optional index.
    pub fn parse_token(token: &str) -> Option<(Placeholder, Option<u32>)> {
        let inner = token.strip_prefix('<')?.strip_suffix('>')?;
        let digits = inner.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        let name = &inner[..inner.len() - digits.len()];
        let kind = Placeholder::from_name(name)?;
        if digits.is_empty() {
            Some((kind, None))
        } else {
            digits.parse().ok().map(|i| (kind, Some(i)))
        }
    }

    pub fn sort(self) -> Sort {
        match self {
            Placeholder::Rel => Sort::Relation,
            Placeholder::Literal => Sort::Literal,
            Placeholder::Class | Placeholder::Entity => Sort::Set,
        }
    }
}

/// Datatype of a literal, after alias resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LiteralType {
    Int,
    Float,
    Year,
    Date,
    Text,
}

impl LiteralType {
    /// Accepts short names and XSD URIs (the fragment after `#` is used).
    pub fn from_datatype(datatype: &str) -> LiteralType {
        let name = datatype.rsplit('#').next().unwrap_or(datatype);
        match name.to_ascii_lowercase().as_str() {
            "int" | "integer" | "long" => LiteralType::Int,
            "float" | "double" | "decimal" => LiteralType::Float,
            "year" | "gyear" => LiteralType::Year,
            "date" | "datetime" | "gyearmonth" => LiteralType::Date,
            _ => LiteralType::Text,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            LiteralType::Int => "int",
            LiteralType::Float => "float",
            LiteralType::Year => "year",
            LiteralType::Date => "date",
            LiteralType::Text => "string",
        }
    }
}

/// A typed literal written `lexical^^datatype`.
///
/// Syntactic equality uses the raw text; [`Literal::key`] gives the value
/// identity used by execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Literal {
    pub lexical: String,
    pub datatype: String,
}

impl Literal {
    pub fn new(lexical: impl Into<String>, datatype: impl Into<String>) -> Literal {
        Literal {
            lexical: lexical.into(),
            datatype: datatype.into(),
        }
    }

    /// Splits `value^^type` at the last `^^`.
    pub fn parse(text: &str) -> Option<Literal> {
        let (lexical, datatype) = text.rsplit_once("^^")?;
        if lexical.is_empty() || datatype.is_empty() {
            return None;
        }
        Some(Literal::new(lexical, datatype))
    }

    pub fn kind(&self) -> LiteralType {
        LiteralType::from_datatype(&self.datatype)
    }

    /// Lexical form without surrounding quotes.
    pub fn value_text(&self) -> &str {
        let s = self.lexical.as_str();
        s.strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .unwrap_or(s)
    }

    /// Orderable numeric view of int, float, year and date literals.
    pub fn numeric(&self) -> Option<f64> {
        let text = self.value_text();
        match self.kind() {
            LiteralType::Int | LiteralType::Float => text.parse::<f64>().ok(),
            LiteralType::Year => text.parse::<i32>().ok().map(f64::from),
            LiteralType::Date => parse_date(text).map(|(y, m, d)| {
                f64::from(y) + (f64::from(m) - 1.0) / 12.0 + (f64::from(d) - 1.0) / 372.0
            }),
            LiteralType::Text => None,
        }
    }

    /// Same value written with the short datatype name and, for numbers,
    /// the shortest lexical form.
    pub fn canonical(&self) -> Literal {
        let kind = self.kind();
        let text = self.value_text();
        let lexical = match kind {
            LiteralType::Int => text.parse::<i64>().map(|v| v.to_string()).ok(),
            LiteralType::Float => text.parse::<f64>().map(|v| v.to_string()).ok(),
            LiteralType::Year => text.parse::<i32>().map(|v| v.to_string()).ok(),
            LiteralType::Date | LiteralType::Text => None,
        }
        .unwrap_or_else(|| self.lexical.clone());
        Literal::new(lexical, kind.short_name())
    }

    /// Value identity: numeric literals compare by number, text by content.
    pub fn key(&self) -> String {
        match self.kind() {
            LiteralType::Text => format!("string:{}", self.value_text()),
            kind => match self.numeric() {
                Some(v) => format!("{}:{}", kind.short_name(), v),
                None => format!("{}:{}", kind.short_name(), self.value_text()),
            },
        }
    }
}

fn parse_date(text: &str) -> Option<(i32, u32, u32)> {
    let date = text.split('T').next()?;
    let mut parts = date.splitn(3, '-');
    let y = parts.next()?.parse().ok()?;
    let m = parts.next().map_or(Some(1), |p| p.parse().ok())?;
    let d = parts.next().map_or(Some(1), |p| p.parse().ok())?;
    ((1..=12).contains(&m) && (1..=31).contains(&d)).then_some((y, m, d))
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^^{}", self.lexical, self.datatype)
    }
}

/// A leaf of the tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leaf {
    Relation(String),
    Class(String),
    Entity(String),
    Literal(Literal),
    Slot(Placeholder, Option<u32>),
}

impl Leaf {
    pub fn sort(&self) -> Sort {
        match self {
            Leaf::Relation(_) => Sort::Relation,
            Leaf::Literal(_) => Sort::Literal,
            Leaf::Class(_) | Leaf::Entity(_) => Sort::Set,
            Leaf::Slot(p, _) => p.sort(),
        }
    }

    /// Whether the leaf may stand at a position of `sort`. Literals are also
    /// admissible as sets (a join object may be a literal value).
    pub fn fits(&self, sort: Sort) -> bool {
        match (self, sort) {
            (Leaf::Literal(_) | Leaf::Slot(Placeholder::Literal, _), Sort::Set) => true,
            (leaf, sort) => leaf.sort() == sort,
        }
    }

    pub fn placeholder(&self) -> Placeholder {
        match self {
            Leaf::Relation(_) => Placeholder::Rel,
            Leaf::Class(_) => Placeholder::Class,
            Leaf::Entity(_) => Placeholder::Entity,
            Leaf::Literal(_) => Placeholder::Literal,
            Leaf::Slot(p, _) => *p,
        }
    }

    pub fn is_slot(&self) -> bool {
        matches!(self, Leaf::Slot(..))
    }
}

impl fmt::Display for Leaf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Leaf::Relation(id) | Leaf::Class(id) | Leaf::Entity(id) => f.write_str(id),
            Leaf::Literal(lit) => lit.fmt(f),
            Leaf::Slot(p, None) => write!(f, "<{}>", p.name()),
            Leaf::Slot(p, Some(i)) => write!(f, "<{}{}>", p.name(), i),
        }
    }
}

/// Abstract syntax tree of a logical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SExpr {
    Leaf(Leaf),
    Node(Operator, Vec<SExpr>),
}

/// Structural defect found by [`SExpr::validate`]. `path` lists child
/// indices from the root.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormError {
    #[error("{op} expects {expected} argument(s), found {found} (at node path {path:?})")]
    Arity {
        op: Operator,
        expected: usize,
        found: usize,
        path: Vec<usize>,
    },
    #[error("{op} cannot appear in a {sort:?}-valued position (at node path {path:?})")]
    Misplaced {
        op: Operator,
        sort: Sort,
        path: Vec<usize>,
    },
    #[error("leaf `{leaf}` cannot appear in a {sort:?}-valued position (at node path {path:?})")]
    LeafSort {
        leaf: String,
        sort: Sort,
        path: Vec<usize>,
    },
    #[error("empty identifier (at node path {path:?})")]
    EmptyLeaf { path: Vec<usize> },
}

impl SExpr {
    pub fn parse(text: &str) -> Result<SExpr, ParseError> {
        parse::parse(text)
    }

    pub fn node(op: Operator, args: Vec<SExpr>) -> SExpr {
        SExpr::Node(op, args)
    }

    pub fn relation(id: impl Into<String>) -> SExpr {
        SExpr::Leaf(Leaf::Relation(id.into()))
    }

    pub fn class(id: impl Into<String>) -> SExpr {
        SExpr::Leaf(Leaf::Class(id.into()))
    }

    pub fn entity(id: impl Into<String>) -> SExpr {
        SExpr::Leaf(Leaf::Entity(id.into()))
    }

    pub fn literal(lit: Literal) -> SExpr {
        SExpr::Leaf(Leaf::Literal(lit))
    }

    pub fn slot(p: Placeholder) -> SExpr {
        SExpr::Leaf(Leaf::Slot(p, None))
    }

    pub fn and(a: SExpr, b: SExpr) -> SExpr {
        SExpr::Node(Operator::And, vec![a, b])
    }

    pub fn join(rel: SExpr, obj: SExpr) -> SExpr {
        SExpr::Node(Operator::Join, vec![rel, obj])
    }

    pub fn reverse(rel: SExpr) -> SExpr {
        SExpr::Node(Operator::R, vec![rel])
    }

    pub fn count(inner: SExpr) -> SExpr {
        SExpr::Node(Operator::Count, vec![inner])
    }

    /// Checks arity and positional sorts, treating the root as set-valued.
    pub fn validate(&self) -> Result<(), FormError> {
        self.validate_at(Sort::Set, &mut Vec::new())
    }

    pub(crate) fn validate_at(&self, sort: Sort, path: &mut Vec<usize>) -> Result<(), FormError> {
        match self {
            SExpr::Leaf(leaf) => {
                if leaf.to_string().is_empty() {
                    return Err(FormError::EmptyLeaf { path: path.clone() });
                }
                if !leaf.fits(sort) {
                    return Err(FormError::LeafSort {
                        leaf: leaf.to_string(),
                        sort,
                        path: path.clone(),
                    });
                }
                Ok(())
            }
            SExpr::Node(op, args) => {
                let Some(sig) = op.signature(sort) else {
                    return Err(FormError::Misplaced {
                        op: *op,
                        sort,
                        path: path.clone(),
                    });
                };
                if sig.len() != args.len() {
                    return Err(FormError::Arity {
                        op: *op,
                        expected: sig.len(),
                        found: args.len(),
                        path: path.clone(),
                    });
                }
                for (i, (arg, s)) in args.iter().zip(sig).enumerate() {
                    path.push(i);
                    arg.validate_at(*s, path)?;
                    path.pop();
                }
                Ok(())
            }
        }
    }

    /// Leaves in print order.
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Leaf>) {
        match self {
            SExpr::Leaf(l) => out.push(l),
            SExpr::Node(_, args) => args.iter().for_each(|a| a.collect_leaves(out)),
        }
    }

    pub fn relations(&self) -> Vec<&str> {
        self.leaves()
            .into_iter()
            .filter_map(|l| match l {
                Leaf::Relation(r) => Some(r.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn classes(&self) -> Vec<&str> {
        self.leaves()
            .into_iter()
            .filter_map(|l| match l {
                Leaf::Class(c) => Some(c.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn entities(&self) -> Vec<&str> {
        self.leaves()
            .into_iter()
            .filter_map(|l| match l {
                Leaf::Entity(e) => Some(e.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn operators(&self) -> Vec<Operator> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let SExpr::Node(op, _) = e {
                out.push(*op);
            }
        });
        out
    }

    /// Maximum parenthesis nesting depth (a bare leaf has depth 0).
    pub fn depth(&self) -> usize {
        match self {
            SExpr::Leaf(_) => 0,
            SExpr::Node(_, args) => 1 + args.iter().map(SExpr::depth).max().unwrap_or(0),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            SExpr::Leaf(_) => 1,
            SExpr::Node(_, args) => 1 + args.iter().map(SExpr::node_count).sum::<usize>(),
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a SExpr)) {
        f(self);
        if let SExpr::Node(_, args) = self {
            for a in args {
                a.walk(f);
            }
        }
    }

    pub fn map_leaves(&self, f: &mut impl FnMut(&Leaf) -> Leaf) -> SExpr {
        match self {
            SExpr::Leaf(l) => SExpr::Leaf(f(l)),
            SExpr::Node(op, args) => {
                SExpr::Node(*op, args.iter().map(|a| a.map_leaves(f)).collect())
            }
        }
    }

    /// Counts leaves with the given placeholder kind (concrete or slot).
    pub fn count_kind(&self, kind: Placeholder) -> usize {
        self.leaves()
            .into_iter()
            .filter(|l| l.placeholder() == kind)
            .count()
    }

    /// Canonical form: `R` pushed to relation leaves with double reversal
    /// removed, relation paths unrolled into join chains, and `AND` operands
    /// flattened, deduplicated and sorted by their printed form.
    pub fn normalize(&self) -> SExpr {
        normalize_set(self, true)
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Leaf(l) => l.fmt(f),
            SExpr::Node(op, args) => {
                write!(f, "({op}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl std::str::FromStr for SExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SExpr::parse(s)
    }
}

/// Relation path as a list of `(relation leaf, reversed)` steps.
fn flatten_path(expr: &SExpr, reversed: bool, out: &mut Vec<(SExpr, bool)>) {
    match expr {
        SExpr::Node(Operator::R, args) if args.len() == 1 => flatten_path(&args[0], !reversed, out),
        SExpr::Node(Operator::Join, args) if args.len() == 2 => {
            if reversed {
                flatten_path(&args[1], true, out);
                flatten_path(&args[0], true, out);
            } else {
                flatten_path(&args[0], false, out);
                flatten_path(&args[1], false, out);
            }
        }
        other => out.push((other.clone(), reversed)),
    }
}

fn step_expr((leaf, reversed): (SExpr, bool)) -> SExpr {
    if reversed {
        SExpr::reverse(leaf)
    } else {
        leaf
    }
}

fn normalize_path(expr: &SExpr) -> SExpr {
    let mut steps = Vec::new();
    flatten_path(expr, false, &mut steps);
    let mut iter = steps.into_iter().rev().map(step_expr);
    let last = iter.next().expect("path has at least one step");
    iter.fold(last, |acc, step| SExpr::join(step, acc))
}

fn normalize_set(expr: &SExpr, dedupe: bool) -> SExpr {
    match expr {
        SExpr::Leaf(Leaf::Literal(l)) => SExpr::literal(l.canonical()),
        SExpr::Leaf(_) => expr.clone(),
        SExpr::Node(Operator::And, _) => {
            let mut operands = Vec::new();
            flatten_and(expr, dedupe, &mut operands);
            let mut keyed: Vec<(String, SExpr)> =
                operands.into_iter().map(|e| (e.to_string(), e)).collect();
            keyed.sort_by(|a, b| a.0.cmp(&b.0));
            if dedupe {
                keyed.dedup_by(|a, b| a.0 == b.0);
            }
            let mut iter = keyed.into_iter().map(|(_, e)| e).rev();
            let last = iter.next().expect("AND has operands");
            iter.fold(last, |acc, e| SExpr::and(e, acc))
        }
        SExpr::Node(Operator::Join, args) if args.len() == 2 => {
            let mut steps = Vec::new();
            flatten_path(&args[0], false, &mut steps);
            let obj = normalize_set(&args[1], dedupe);
            steps
                .into_iter()
                .rev()
                .fold(obj, |acc, step| SExpr::join(step_expr(step), acc))
        }
        SExpr::Node(op, args) if op.is_superlative() && args.len() == 2 => {
            SExpr::Node(*op, vec![normalize_set(&args[0], dedupe), normalize_path(&args[1])])
        }
        SExpr::Node(op, args) if op.is_comparison() && args.len() == 2 => {
            SExpr::Node(*op, vec![normalize_path(&args[0]), normalize_set(&args[1], dedupe)])
        }
        SExpr::Node(op, args) => SExpr::Node(
            *op,
            args.iter().map(|a| normalize_set(a, dedupe)).collect(),
        ),
    }
}

fn flatten_and(expr: &SExpr, dedupe: bool, out: &mut Vec<SExpr>) {
    match expr {
        SExpr::Node(Operator::And, args) => args.iter().for_each(|a| flatten_and(a, dedupe, out)),
        other => out.push(normalize_set(other, dedupe)),
    }
}

/// A logical skeleton: an expression whose leaves are all placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Skeleton(SExpr);

/// Reasons an expression is not a skeleton.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SkeletonFormError {
    #[error("skeleton contains concrete identifier `{0}`")]
    Concrete(String),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl Skeleton {
    pub fn new(expr: SExpr) -> Result<Skeleton, SkeletonFormError> {
        expr.validate()?;
        if let Some(leaf) = expr.leaves().into_iter().find(|l| !l.is_slot()) {
            return Err(SkeletonFormError::Concrete(leaf.to_string()));
        }
        Ok(Skeleton(expr))
    }

    pub fn parse(text: &str) -> Result<Skeleton, SkeletonFormError> {
        Skeleton::new(SExpr::parse(text)?)
    }

    pub fn as_expr(&self) -> &SExpr {
        &self.0
    }

    pub fn into_expr(self) -> SExpr {
        self.0
    }

    pub fn count(&self, kind: Placeholder) -> usize {
        self.0.count_kind(kind)
    }

    pub fn relation_count(&self) -> usize {
        self.count(Placeholder::Rel)
    }

    /// Sorted conjunctions and unrolled paths. Unlike
    /// [`SExpr::normalize`], repeated conjuncts are kept: two
    /// `(JOIN <rel> <entity>)` operands stand for different components.
    pub fn canonical(&self) -> Skeleton {
        Skeleton(normalize_set(&self.0, false))
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Replaces every relation, class, entity and literal with its placeholder,
/// keeping operators and structure.
pub fn skeletonize(expr: &SExpr) -> Skeleton {
    Skeleton(expr.map_leaves(&mut |leaf| Leaf::Slot(leaf.placeholder(), None)))
}
