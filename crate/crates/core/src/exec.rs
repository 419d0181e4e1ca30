//! Set-semantics evaluation of logical forms, the executability check used
//! by composition, and SPARQL emission.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::kb::{is_literal_class, KnowledgeBase, Value};
use crate::logical_form::{FormError, Leaf, Literal, LiteralType, Operator, SExpr};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Answer {
    Values(BTreeSet<Value>),
    Count(usize),
}

impl Answer {
    pub fn is_empty(&self) -> bool {
        match self {
            Answer::Values(v) => v.is_empty(),
            Answer::Count(n) => *n == 0,
        }
    }

    /// String forms used for F1: entity ids, literal value text, or the
    /// count as a decimal number.
    pub fn to_strings(&self) -> BTreeSet<String> {
        match self {
            Answer::Values(v) => v.iter().map(Value::answer_text).collect(),
            Answer::Count(n) => [n.to_string()].into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("unknown {kind} `{id}`")]
    Unresolved { kind: &'static str, id: String },
    #[error("placeholder `{0}` cannot be executed")]
    Placeholder(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("{0} over an empty domain")]
    EmptyDomain(Operator),
}

/// Evaluates a well-formed expression with set semantics.
pub fn execute(expr: &SExpr, kb: &KnowledgeBase) -> Result<Answer, ExecError> {
    expr.validate()?;
    match expr {
        SExpr::Node(Operator::Count, args) => Ok(Answer::Count(eval_set(&args[0], kb)?.len())),
        other => Ok(Answer::Values(eval_set(other, kb)?)),
    }
}

fn unresolved(kind: &'static str, id: &str) -> ExecError {
    ExecError::Unresolved {
        kind,
        id: id.to_string(),
    }
}

fn relation_edges<'a>(
    kb: &'a KnowledgeBase,
    r: &str,
) -> Result<Option<&'a crate::kb::RelationEdges>, ExecError> {
    if kb.relation(r).is_none() {
        return Err(unresolved("relation", r));
    }
    Ok(kb.edges(r))
}

/// Leftmost nodes `s` such that the path leads from `s` into `targets`.
fn preimage(
    path: &SExpr,
    targets: &BTreeSet<Value>,
    kb: &KnowledgeBase,
) -> Result<BTreeSet<Value>, ExecError> {
    match path {
        SExpr::Leaf(Leaf::Relation(r)) => {
            let mut out = BTreeSet::new();
            if let Some(edges) = relation_edges(kb, r)? {
                for t in targets {
                    if let Some(subjects) = edges.backward.get(t) {
                        out.extend(subjects.iter().cloned().map(Value::Entity));
                    }
                }
            }
            Ok(out)
        }
        SExpr::Node(Operator::R, args) => image(&args[0], targets, kb),
        SExpr::Node(Operator::Join, args) => {
            let mid = preimage(&args[1], targets, kb)?;
            preimage(&args[0], &mid, kb)
        }
        other => Err(ExecError::Type(format!("`{other}` is not a relation path"))),
    }
}

/// Rightmost nodes reached by following the path from `sources`.
fn image(
    path: &SExpr,
    sources: &BTreeSet<Value>,
    kb: &KnowledgeBase,
) -> Result<BTreeSet<Value>, ExecError> {
    match path {
        SExpr::Leaf(Leaf::Relation(r)) => {
            let mut out = BTreeSet::new();
            if let Some(edges) = relation_edges(kb, r)? {
                for s in sources {
                    if let Some(objects) = s.as_entity().and_then(|e| edges.forward.get(e)) {
                        out.extend(objects.iter().cloned());
                    }
                }
            }
            Ok(out)
        }
        SExpr::Node(Operator::R, args) => preimage(&args[0], sources, kb),
        SExpr::Node(Operator::Join, args) => {
            let mid = image(&args[0], sources, kb)?;
            image(&args[1], &mid, kb)
        }
        other => Err(ExecError::Type(format!("`{other}` is not a relation path"))),
    }
}

/// Every node reachable as the far end of the path.
fn path_range(path: &SExpr, kb: &KnowledgeBase) -> Result<BTreeSet<Value>, ExecError> {
    match path {
        SExpr::Leaf(Leaf::Relation(r)) => Ok(relation_edges(kb, r)?
            .map(|e| e.backward.keys().cloned().collect())
            .unwrap_or_default()),
        SExpr::Node(Operator::R, args) => path_domain(&args[0], kb),
        SExpr::Node(Operator::Join, args) => path_range(&args[1], kb),
        other => Err(ExecError::Type(format!("`{other}` is not a relation path"))),
    }
}

fn path_domain(path: &SExpr, kb: &KnowledgeBase) -> Result<BTreeSet<Value>, ExecError> {
    match path {
        SExpr::Leaf(Leaf::Relation(r)) => Ok(relation_edges(kb, r)?
            .map(|e| e.forward.keys().cloned().map(Value::Entity).collect())
            .unwrap_or_default()),
        SExpr::Node(Operator::R, args) => path_range(&args[0], kb),
        SExpr::Node(Operator::Join, args) => path_domain(&args[0], kb),
        other => Err(ExecError::Type(format!("`{other}` is not a relation path"))),
    }
}

fn numeric_value(v: &Value) -> Option<f64> {
    match v {
        Value::Literal(l) => l.numeric(),
        Value::Entity(_) => None,
    }
}

fn compare(op: Operator, a: f64, b: f64) -> bool {
    match op {
        Operator::Lt => a < b,
        Operator::Le => a <= b,
        Operator::Gt => a > b,
        Operator::Ge => a >= b,
        _ => unreachable!("not a comparison"),
    }
}

fn eval_set(expr: &SExpr, kb: &KnowledgeBase) -> Result<BTreeSet<Value>, ExecError> {
    match expr {
        SExpr::Leaf(Leaf::Class(c)) => Ok(kb
            .members(c)
            .map_err(|_| unresolved("class", c))?
            .iter()
            .cloned()
            .map(Value::Entity)
            .collect()),
        SExpr::Leaf(Leaf::Entity(e)) => {
            if kb.entity(e).is_none() {
                return Err(unresolved("entity", e));
            }
            Ok([Value::Entity(e.clone())].into())
        }
        SExpr::Leaf(Leaf::Literal(l)) => Ok([Value::literal(l)].into()),
        SExpr::Leaf(leaf @ Leaf::Slot(..)) => Err(ExecError::Placeholder(leaf.to_string())),
        SExpr::Leaf(Leaf::Relation(r)) => {
            Err(ExecError::Type(format!("relation `{r}` in a set position")))
        }
        SExpr::Node(Operator::And, args) => {
            let a = eval_set(&args[0], kb)?;
            if a.is_empty() {
                // still resolve the right side so unknown ids are reported
                eval_set(&args[1], kb)?;
                return Ok(a);
            }
            let b = eval_set(&args[1], kb)?;
            Ok(a.intersection(&b).cloned().collect())
        }
        SExpr::Node(Operator::Join, args) => {
            let objects = eval_set(&args[1], kb)?;
            preimage(&args[0], &objects, kb)
        }
        SExpr::Node(Operator::Count, args) => {
            let n = eval_set(&args[0], kb)?.len();
            Ok([Value::literal(&Literal::new(n.to_string(), "int"))].into())
        }
        SExpr::Node(op, args) if op.is_superlative() => {
            let domain = eval_set(&args[0], kb)?;
            let mut best: Option<f64> = None;
            let mut winners = BTreeSet::new();
            for x in domain {
                let values = image(&args[1], &[x.clone()].into(), kb)?;
                for v in values.iter().filter_map(numeric_value) {
                    let better = match best {
                        None => true,
                        Some(b) if *op == Operator::ArgMax => v > b,
                        Some(b) => v < b,
                    };
                    if better {
                        best = Some(v);
                        winners.clear();
                    }
                    if best == Some(v) {
                        winners.insert(x.clone());
                    }
                }
            }
            if best.is_none() {
                return Err(ExecError::EmptyDomain(*op));
            }
            Ok(winners)
        }
        SExpr::Node(op, args) if op.is_comparison() => {
            let SExpr::Leaf(Leaf::Literal(bound)) = &args[1] else {
                return Err(ExecError::Type(format!("{op} needs a literal bound")));
            };
            let b = bound
                .numeric()
                .ok_or_else(|| ExecError::Type(format!("{op} on non-numeric literal `{bound}`")))?;
            let passing: BTreeSet<Value> = path_range(&args[0], kb)?
                .into_iter()
                .filter(|v| numeric_value(v).is_some_and(|x| compare(*op, x, b)))
                .collect();
            preimage(&args[0], &passing, kb)
        }
        SExpr::Node(op, _) => Err(ExecError::Type(format!("{op} in a set position"))),
    }
}

/// Why an expression was judged not executable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
pub enum Rejection {
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("unresolved identifier `{0}`")]
    Unresolved(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("execution failed: {0}")]
    Execution(String),
    #[error("empty answer")]
    Empty,
}

impl Rejection {
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::Malformed(_) => "malformed",
            Rejection::Unresolved(_) => "unresolved",
            Rejection::TypeMismatch(_) => "type_mismatch",
            Rejection::Execution(_) => "execution",
            Rejection::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    /// Also execute and demand a non-empty answer.
    pub require_nonempty: bool,
}

/// Static type of a set-valued subexpression.
#[derive(Debug, Clone, PartialEq, Eq)]
enum SetType {
    /// Untyped entity; compatible with anything entity-valued.
    Any,
    Entities(BTreeSet<String>),
    Literal,
}

struct Checker<'a> {
    kb: &'a KnowledgeBase,
}

impl Checker<'_> {
    /// (domain, range) of a relation path.
    fn path(&self, path: &SExpr) -> Result<(String, String), Rejection> {
        match path {
            SExpr::Leaf(Leaf::Relation(r)) => {
                let rel = self
                    .kb
                    .relation(r)
                    .ok_or_else(|| Rejection::Unresolved(r.clone()))?;
                Ok((rel.domain.clone(), rel.range.clone()))
            }
            SExpr::Node(Operator::R, args) => {
                let (d, r) = self.path(&args[0])?;
                Ok((r, d))
            }
            SExpr::Node(Operator::Join, args) => {
                let (d1, r1) = self.path(&args[0])?;
                let (d2, r2) = self.path(&args[1])?;
                if r1 != d2 {
                    return Err(Rejection::TypeMismatch(format!(
                        "path `{path}` joins {r1} to {d2}"
                    )));
                }
                Ok((d1, r2))
            }
            other => Err(Rejection::Malformed(format!("`{other}` is not a path"))),
        }
    }

    fn accepts(&self, class: &str, t: &SetType) -> bool {
        match t {
            SetType::Any => !is_literal_class(class),
            SetType::Literal => is_literal_class(class),
            SetType::Entities(s) => s.contains(class),
        }
    }

    fn set(&self, expr: &SExpr, root: bool) -> Result<SetType, Rejection> {
        match expr {
            SExpr::Leaf(Leaf::Class(c)) => {
                if self.kb.class(c).is_none() {
                    return Err(Rejection::Unresolved(c.clone()));
                }
                Ok(SetType::Entities([c.clone()].into()))
            }
            SExpr::Leaf(Leaf::Entity(e)) => {
                if self.kb.entity(e).is_none() {
                    return Err(Rejection::Unresolved(e.clone()));
                }
                let types = self.kb.types_of(e);
                Ok(if types.is_empty() {
                    SetType::Any
                } else {
                    SetType::Entities(types.clone())
                })
            }
            SExpr::Leaf(Leaf::Literal(_)) => Ok(SetType::Literal),
            SExpr::Leaf(leaf) => Err(Rejection::Malformed(format!(
                "`{leaf}` in a set position"
            ))),
            SExpr::Node(Operator::And, args) => {
                let a = self.set(&args[0], false)?;
                let b = self.set(&args[1], false)?;
                match (a, b) {
                    (SetType::Any, t) | (t, SetType::Any) => Ok(t),
                    (SetType::Literal, SetType::Literal) => Ok(SetType::Literal),
                    (SetType::Entities(x), SetType::Entities(y)) => {
                        if x.intersection(&y).next().is_some() || self.share_member(&x, &y) {
                            Ok(SetType::Entities(x.union(&y).cloned().collect()))
                        } else {
                            Err(Rejection::TypeMismatch(format!(
                                "conjunction of disjoint types in `{expr}`"
                            )))
                        }
                    }
                    _ => Err(Rejection::TypeMismatch(format!(
                        "conjunction of literals and entities in `{expr}`"
                    ))),
                }
            }
            SExpr::Node(Operator::Join, args) => {
                let (domain, range) = self.path(&args[0])?;
                let object = self.set(&args[1], false)?;
                if !self.accepts(&range, &object) {
                    return Err(Rejection::TypeMismatch(format!(
                        "`{}` expects {range} objects",
                        args[0]
                    )));
                }
                Ok(SetType::Entities([domain].into()))
            }
            SExpr::Node(Operator::Count, args) => {
                if !root {
                    return Err(Rejection::Malformed("COUNT below the root".into()));
                }
                self.set(&args[0], false)
            }
            SExpr::Node(op, args) if op.is_superlative() => {
                let t = self.set(&args[0], false)?;
                let (domain, range) = self.path(&args[1])?;
                if !self.accepts(&domain, &t) {
                    return Err(Rejection::TypeMismatch(format!(
                        "{op} path starts at {domain}"
                    )));
                }
                if !numeric_class(&range) {
                    return Err(Rejection::TypeMismatch(format!(
                        "{op} path ends at non-numeric {range}"
                    )));
                }
                Ok(t)
            }
            SExpr::Node(op, args) if op.is_comparison() => {
                let (domain, range) = self.path(&args[0])?;
                let SExpr::Leaf(Leaf::Literal(bound)) = &args[1] else {
                    return Err(Rejection::Malformed(format!("{op} needs a literal")));
                };
                if bound.numeric().is_none() {
                    return Err(Rejection::TypeMismatch(format!(
                        "{op} on non-numeric literal `{bound}`"
                    )));
                }
                if !numeric_class(&range) {
                    return Err(Rejection::TypeMismatch(format!(
                        "{op} path ends at non-numeric {range}"
                    )));
                }
                Ok(SetType::Entities([domain].into()))
            }
            SExpr::Node(op, _) => Err(Rejection::Malformed(format!("{op} in a set position"))),
        }
    }

    fn share_member(&self, x: &BTreeSet<String>, y: &BTreeSet<String>) -> bool {
        x.iter().any(|a| {
            let Ok(ma) = self.kb.members(a) else {
                return false;
            };
            y.iter().any(|b| {
                self.kb
                    .members(b)
                    .is_ok_and(|mb| ma.intersection(mb).next().is_some())
            })
        })
    }
}

fn numeric_class(class: &str) -> bool {
    is_literal_class(class)
        && !matches!(
            LiteralType::from_datatype(class.trim_start_matches("type.")),
            LiteralType::Text
        )
}

/// Structural and type-level executability, optionally with a non-empty
/// answer requirement.
pub fn check_executable(
    expr: &SExpr,
    kb: &KnowledgeBase,
    opts: ExecOptions,
) -> Result<(), Rejection> {
    expr.validate()
        .map_err(|e| Rejection::Malformed(e.to_string()))?;
    let mut slot = None;
    expr.walk(&mut |e| {
        if let SExpr::Leaf(leaf @ Leaf::Slot(..)) = e {
            slot.get_or_insert_with(|| leaf.to_string());
        }
    });
    if let Some(s) = slot {
        return Err(Rejection::Malformed(format!("unfilled placeholder {s}")));
    }
    Checker { kb }.set(expr, true)?;
    if opts.require_nonempty {
        let answer = execute(expr, kb).map_err(|e| Rejection::Execution(e.to_string()))?;
        if answer.is_empty() {
            return Err(Rejection::Empty);
        }
    }
    Ok(())
}

/// Structural executability (the default mode).
pub fn is_executable(expr: &SExpr, kb: &KnowledgeBase) -> bool {
    check_executable(expr, kb, ExecOptions::default()).is_ok()
}

const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

fn sparql_literal(l: &Literal) -> String {
    let dt = match l.kind() {
        LiteralType::Int => "integer",
        LiteralType::Float => "double",
        LiteralType::Year => "gYear",
        LiteralType::Date => "date",
        LiteralType::Text => "string",
    };
    let text = l.value_text().replace('\\', "\\\\").replace('"', "\\\"");
    format!("\"{text}\"^^<{XSD}{dt}>")
}

struct Emitter {
    vars: usize,
    patterns: Vec<String>,
    filters: Vec<String>,
    order: Option<String>,
}

impl Emitter {
    fn fresh(&mut self) -> String {
        let v = format!("?x{}", self.vars);
        self.vars += 1;
        v
    }

    fn path(&mut self, from: &str, path: &SExpr, to: &str) {
        let mut steps = Vec::new();
        collect_steps(path, &mut steps);
        let mut cur = from.to_string();
        for (i, step) in steps.iter().enumerate() {
            let next = if i + 1 == steps.len() {
                to.to_string()
            } else {
                self.fresh()
            };
            match step {
                SExpr::Node(Operator::R, args) => {
                    self.patterns.push(format!("{next} <{}> {cur} .", args[0]))
                }
                rel => self.patterns.push(format!("{cur} <{rel}> {next} .")),
            }
            cur = next;
        }
    }

    fn set(&mut self, var: &str, expr: &SExpr) {
        match expr {
            SExpr::Leaf(Leaf::Class(c)) => self
                .patterns
                .push(format!("{var} <{}> <{c}> .", crate::kb::TYPE_RELATION)),
            SExpr::Leaf(Leaf::Entity(e)) => self.filters.push(format!("FILTER ({var} = <{e}>)")),
            SExpr::Leaf(Leaf::Literal(l)) => self
                .filters
                .push(format!("FILTER ({var} = {})", sparql_literal(l))),
            SExpr::Leaf(leaf) => self.filters.push(format!("# unfilled {leaf}")),
            SExpr::Node(Operator::And, args) => {
                self.set(var, &args[0]);
                self.set(var, &args[1]);
            }
            SExpr::Node(Operator::Join, args) => match &args[1] {
                SExpr::Leaf(Leaf::Entity(e)) => self.path(var, &args[0], &format!("<{e}>")),
                SExpr::Leaf(Leaf::Literal(l)) => self.path(var, &args[0], &sparql_literal(l)),
                inner => {
                    let obj = self.fresh();
                    self.path(var, &args[0], &obj);
                    self.set(&obj, inner);
                }
            },
            SExpr::Node(Operator::Count, args) => self.set(var, &args[0]),
            SExpr::Node(op, args) if op.is_superlative() => {
                self.set(var, &args[0]);
                let value = self.fresh();
                self.path(var, &args[1], &value);
                let dir = if *op == Operator::ArgMax { "DESC" } else { "ASC" };
                self.order = Some(format!("ORDER BY {dir}({value}) LIMIT 1"));
            }
            SExpr::Node(op, args) => {
                let value = self.fresh();
                self.path(var, &args[0], &value);
                let sym = match op {
                    Operator::Lt => "<",
                    Operator::Le => "<=",
                    Operator::Gt => ">",
                    _ => ">=",
                };
                let bound = match &args[1] {
                    SExpr::Leaf(Leaf::Literal(l)) => sparql_literal(l),
                    other => other.to_string(),
                };
                self.filters.push(format!("FILTER ({value} {sym} {bound})"));
            }
        }
    }
}

fn collect_steps<'a>(path: &'a SExpr, out: &mut Vec<&'a SExpr>) {
    match path {
        SExpr::Node(Operator::Join, args) => {
            collect_steps(&args[0], out);
            collect_steps(&args[1], out);
        }
        step => out.push(step),
    }
}

/// SPARQL SELECT text for the canonical form of `expr`. Variables are
/// numbered `?x0, ?x1, ...` in construction order; `?x0` is the answer.
pub fn emit_sparql(expr: &SExpr) -> String {
    let canon = expr.normalize();
    let mut em = Emitter {
        vars: 0,
        patterns: Vec::new(),
        filters: Vec::new(),
        order: None,
    };
    let answer = em.fresh();
    em.set(&answer, &canon);
    let projection = if matches!(canon, SExpr::Node(Operator::Count, _)) {
        format!("(COUNT(DISTINCT {answer}) AS ?count)")
    } else {
        format!("DISTINCT {answer}")
    };
    let mut out = format!("SELECT {projection} WHERE {{");
    for p in em.patterns.iter().chain(&em.filters) {
        let _ = write!(out, " {p}");
    }
    out.push_str(" }");
    if let Some(order) = em.order {
        let _ = write!(out, " {order}");
    }
    out
}
