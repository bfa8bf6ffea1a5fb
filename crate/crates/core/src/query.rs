//! Queries: term-consuming functions into an optional value, combined by a monoid.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::rules::{eval_guard, Guard};
use crate::signature::Signature;
use crate::term::{instantiate, match_pattern, Literal, Pattern, PrimKind, Term, TermKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Term(Term),
    List(Vec<Value>),
    Pair(Box<Value>, Box<Value>),
}

impl Value {
    fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::Term(_) => "term",
            Value::List(_) => "list",
            Value::Pair(..) => "pair",
        }
    }

    /// The value a term denotes: literals become scalars, anything else stays a term.
    pub fn of_term(t: &Term) -> Value {
        match t.kind() {
            TermKind::Lit { value: Literal::Int(i), .. } => Value::Int(*i),
            TermKind::Lit { value: Literal::Float(x), .. } => Value::Float(*x),
            TermKind::Lit { value: Literal::Str(s), .. } => Value::Str(s.to_string()),
            TermKind::Node { .. } => Value::Term(t.clone()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Term(t) => write!(f, "{t}"),
            Value::List(xs) => {
                f.write_str("[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            Value::Pair(a, b) => write!(f, "({a}, {b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Monoid {
    IntSum,
    FloatSum,
    Count,
    List,
    Max,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("monoid `{monoid}` cannot combine a {kind} value")]
    Kind { monoid: &'static str, kind: &'static str },
    #[error("unknown query rule `{0}`")]
    UnknownRule(String),
    #[error("query rule `{rule}`: {message}")]
    Rule { rule: String, message: String },
}

impl Monoid {
    pub const ALL: [Monoid; 5] = [Monoid::IntSum, Monoid::FloatSum, Monoid::Count, Monoid::List, Monoid::Max];

    pub fn name(self) -> &'static str {
        match self {
            Monoid::IntSum => "int-sum",
            Monoid::FloatSum => "float-sum",
            Monoid::Count => "count",
            Monoid::List => "list",
            Monoid::Max => "max",
        }
    }

    pub fn from_name(s: &str) -> Option<Monoid> {
        Monoid::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn unit(self) -> Value {
        match self {
            Monoid::IntSum | Monoid::Count => Value::Int(0),
            Monoid::FloatSum => Value::Float(0.0),
            Monoid::List => Value::List(Vec::new()),
            Monoid::Max => Value::Int(i64::MIN),
        }
    }

    fn kind_error(self, v: &Value) -> QueryError {
        QueryError::Kind { monoid: self.name(), kind: v.kind_name() }
    }

    /// Brings a value into the monoid's carrier.
    pub fn inject(self, v: Value) -> Result<Value, QueryError> {
        match (self, v) {
            (Monoid::IntSum | Monoid::Count | Monoid::Max, Value::Int(i)) => Ok(Value::Int(i)),
            (Monoid::FloatSum, Value::Int(i)) => Ok(Value::Float(i as f64)),
            (Monoid::FloatSum, Value::Float(x)) => Ok(Value::Float(x)),
            (Monoid::List, Value::List(xs)) => Ok(Value::List(xs)),
            (Monoid::List, v) => Ok(Value::List(vec![v])),
            (m, v) => Err(m.kind_error(&v)),
        }
    }

    pub fn combine(self, a: Value, b: Value) -> Result<Value, QueryError> {
        let a = self.inject(a)?;
        let b = self.inject(b)?;
        Ok(match (self, a, b) {
            (Monoid::IntSum | Monoid::Count, Value::Int(x), Value::Int(y)) => Value::Int(x.wrapping_add(y)),
            (Monoid::Max, Value::Int(x), Value::Int(y)) => Value::Int(x.max(y)),
            (Monoid::FloatSum, Value::Float(x), Value::Float(y)) => Value::Float(x + y),
            (Monoid::List, Value::List(mut x), Value::List(y)) => {
                x.extend(y);
                Value::List(x)
            }
            (m, a, _) => return Err(m.kind_error(&a)),
        })
    }
}

impl fmt::Display for Monoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a query rule returns for the bindings of its pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueExpr {
    Var(String),
    Const(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRule {
    pub name: String,
    pub sort: String,
    pub pattern: Pattern,
    pub guard: Option<Guard>,
    pub value: ValueExpr,
}

impl QueryRule {
    fn apply(&self, t: &Term) -> Result<Option<Value>, QueryError> {
        let Some(theta) = match_pattern(&self.pattern, t) else {
            return Ok(None);
        };
        let err = |message: String| QueryError::Rule { rule: self.name.clone(), message };
        if let Some(g) = &self.guard {
            let args = g
                .args
                .iter()
                .map(|a| instantiate(a, &theta))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(e.to_string()))?;
            if !eval_guard(&g.pred, &args).ok_or_else(|| err(format!("unknown guard `{}`", g.pred)))? {
                return Ok(None);
            }
        }
        Ok(Some(match &self.value {
            ValueExpr::Const(v) => v.clone(),
            ValueExpr::Var(x) => Value::of_term(theta.get(x).ok_or_else(|| err(format!("unbound variable `{x}`")))?),
        }))
    }

    /// Kind of value the rule yields, given the sorts of its pattern variables.
    pub fn value_kind(&self, var_sorts: &BTreeMap<String, String>, sig: &Signature) -> &'static str {
        match &self.value {
            ValueExpr::Const(v) => v.kind_name(),
            ValueExpr::Var(x) => match var_sorts.get(x).and_then(|s| sig.prim_kind(s)) {
                Some(PrimKind::Int) => "int",
                Some(PrimKind::Float) => "float",
                Some(PrimKind::Str) => "string",
                None => "term",
            },
        }
    }
}

pub type QueryRules = BTreeMap<String, QueryRule>;

#[derive(Debug, Clone, PartialEq)]
pub enum QueryExpr {
    Const(Value),
    Fail,
    Both(Box<QueryExpr>, Box<QueryExpr>),
    Choice(Box<QueryExpr>, Box<QueryExpr>),
    All(Box<QueryExpr>),
    Adhoc(Box<QueryExpr>, String),
    FullCl(Box<QueryExpr>),
    StopCl(Box<QueryExpr>),
    OnceCl(Box<QueryExpr>),
}

impl QueryExpr {
    pub fn rule_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(q) = stack.pop() {
            match q {
                QueryExpr::Const(_) | QueryExpr::Fail => {}
                QueryExpr::Both(a, b) | QueryExpr::Choice(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                QueryExpr::All(e) | QueryExpr::FullCl(e) | QueryExpr::StopCl(e) | QueryExpr::OnceCl(e) => stack.push(e),
                QueryExpr::Adhoc(e, r) => {
                    out.push(r.as_str());
                    stack.push(e);
                }
            }
        }
        out
    }

    /// Constant values reachable in the expression.
    fn constants(&self) -> Vec<&Value> {
        match self {
            QueryExpr::Const(v) => vec![v],
            QueryExpr::Fail => Vec::new(),
            QueryExpr::Both(a, b) | QueryExpr::Choice(a, b) => {
                let mut v = a.constants();
                v.extend(b.constants());
                v
            }
            QueryExpr::All(e)
            | QueryExpr::FullCl(e)
            | QueryExpr::StopCl(e)
            | QueryExpr::OnceCl(e)
            | QueryExpr::Adhoc(e, _) => e.constants(),
        }
    }
}

impl fmt::Display for QueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryExpr::Const(v) => write!(f, "constq({v})"),
            QueryExpr::Fail => f.write_str("failq"),
            QueryExpr::Both(a, b) => write!(f, "bothq({a}, {b})"),
            QueryExpr::Choice(a, b) => write!(f, "({a} <+ {b})"),
            QueryExpr::All(e) => write!(f, "allq({e})"),
            QueryExpr::Adhoc(e, r) => write!(f, "adhocq({e}, {r})"),
            QueryExpr::FullCl(e) => write!(f, "full_cl({e})"),
            QueryExpr::StopCl(e) => write!(f, "stop_cl({e})"),
            QueryExpr::OnceCl(e) => write!(f, "once_cl({e})"),
        }
    }
}

/// Right fold of query adhoc over the cases, like its strategy counterpart.
pub fn familyq<S: AsRef<str>>(cases: &[S], default: QueryExpr) -> QueryExpr {
    cases
        .iter()
        .rev()
        .fold(default, |acc, c| QueryExpr::Adhoc(Box::new(acc), c.as_ref().to_string()))
}

/// Static kind check: every constant and every case value must fit the monoid where
/// it can reach a combination. Values under `bothq` are exempt; they are only
/// combined by the list monoid, which accepts anything.
pub fn check_kinds(
    q: &QueryExpr,
    qrules: &QueryRules,
    sig: &Signature,
    monoid: Monoid,
) -> Result<(), QueryError> {
    for v in q.constants() {
        monoid.inject(v.clone())?;
    }
    for r in q.rule_names() {
        let rule = qrules.get(r).ok_or_else(|| QueryError::UnknownRule(r.to_string()))?;
        let mut vars = BTreeMap::new();
        let _ = crate::rules::check_pattern(sig, &rule.pattern, &rule.sort, &mut vars);
        let kind = rule.value_kind(&vars, sig);
        let sample = match kind {
            "int" => Value::Int(0),
            "float" => Value::Float(0.0),
            "string" => Value::Str(String::new()),
            _ => Value::Term(Term::constant("_")),
        };
        monoid.inject(sample)?;
    }
    Ok(())
}

struct QueryMachine<'a> {
    sig: &'a Signature,
    qrules: &'a QueryRules,
    monoid: Monoid,
}

impl QueryMachine<'_> {
    fn combine_all<'t>(&self, ts: impl Iterator<Item = &'t Term>, q: &QueryExpr) -> Result<Value, QueryError> {
        let mut acc = self.monoid.unit();
        for t in ts {
            let v = self.eval(q, t)?.unwrap_or_else(|| self.monoid.unit());
            acc = self.monoid.combine(acc, v)?;
        }
        Ok(acc)
    }

    fn eval(&self, q: &QueryExpr, t: &Term) -> Result<Option<Value>, QueryError> {
        crate::term::with_stack(|| self.eval_inner(q, t))
    }

    fn eval_inner(&self, q: &QueryExpr, t: &Term) -> Result<Option<Value>, QueryError> {
        Ok(match q {
            QueryExpr::Const(v) => Some(v.clone()),
            QueryExpr::Fail => None,
            QueryExpr::Both(a, b) => match (self.eval(a, t)?, self.eval(b, t)?) {
                (Some(x), Some(y)) => Some(Value::Pair(Box::new(x), Box::new(y))),
                _ => None,
            },
            QueryExpr::Choice(a, b) => match self.eval(a, t)? {
                Some(v) => Some(v),
                None => self.eval(b, t)?,
            },
            QueryExpr::All(e) => Some(self.combine_all(t.children().iter(), e)?),
            QueryExpr::Adhoc(d, r) => {
                let rule = self.qrules.get(r).ok_or_else(|| QueryError::UnknownRule(r.clone()))?;
                if self.sig.sort_of(t).is_ok_and(|s| s == rule.sort) {
                    rule.apply(t)?
                } else {
                    self.eval(d, t)?
                }
            }
            QueryExpr::FullCl(e) => {
                let here = self.eval(e, t)?.unwrap_or_else(|| self.monoid.unit());
                let here = self.monoid.inject(here)?;
                Some(self.monoid.combine(here, self.combine_all(t.children().iter(), q)?)?)
            }
            QueryExpr::StopCl(e) => match self.eval(e, t)? {
                Some(v) => Some(self.monoid.inject(v)?),
                None => Some(self.combine_all(t.children().iter(), q)?),
            },
            QueryExpr::OnceCl(e) => match self.eval(e, t)? {
                Some(v) => Some(v),
                None => {
                    let mut found = None;
                    for c in t.children() {
                        if let Some(v) = self.eval(q, c)? {
                            found = Some(v);
                            break;
                        }
                    }
                    found
                }
            },
        })
    }
}

/// Runs a query. `Ok(None)` is the absence of a result.
pub fn run_query(
    sig: &Signature,
    qrules: &QueryRules,
    q: &QueryExpr,
    t: &Term,
    monoid: Monoid,
) -> Result<Option<Value>, QueryError> {
    QueryMachine { sig, qrules, monoid }.eval(q, t)
}
