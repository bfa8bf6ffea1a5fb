//! Rewrite rules, guard predicates and rule composites.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::error::Diagnostic;
use crate::signature::Signature;
use crate::term::{instantiate, match_pattern, Literal, Pattern, PrimKind, Term, TermError, TermKind};
use crate::termination::Rel;

/// A named predicate applied to instantiated argument patterns after matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub pred: String,
    pub args: Vec<Pattern>,
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|a| a.to_string()).collect();
        write!(f, "{}({})", self.pred, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleBody {
    Rewrite { lhs: Pattern, rhs: Pattern, guard: Option<Guard> },
    /// First member, or the second where the first does not apply.
    Choice(String, String),
    /// First member, then the second on its result.
    Seq(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDef {
    pub name: String,
    pub sort: String,
    pub body: RuleBody,
    /// Claim that the rule succeeds on every term of its sort.
    pub infallible: bool,
    /// Claimed effect on the analysis measure, most significant component first.
    pub measure: Option<Vec<Rel>>,
}

impl RuleDef {
    pub fn rewrite(name: &str, sort: &str, lhs: Pattern, rhs: Pattern) -> RuleDef {
        RuleDef {
            name: name.to_string(),
            sort: sort.to_string(),
            body: RuleBody::Rewrite { lhs, rhs, guard: None },
            infallible: false,
            measure: None,
        }
    }

    pub fn with_guard(mut self, pred: &str, args: Vec<Pattern>) -> RuleDef {
        if let RuleBody::Rewrite { guard, .. } = &mut self.body {
            *guard = Some(Guard { pred: pred.to_string(), args });
        }
        self
    }

    pub fn composite_choice(name: &str, sort: &str, a: &str, b: &str) -> RuleDef {
        RuleDef {
            name: name.to_string(),
            sort: sort.to_string(),
            body: RuleBody::Choice(a.to_string(), b.to_string()),
            infallible: false,
            measure: None,
        }
    }

    pub fn composite_seq(name: &str, sort: &str, a: &str, b: &str) -> RuleDef {
        RuleDef {
            name: name.to_string(),
            sort: sort.to_string(),
            body: RuleBody::Seq(a.to_string(), b.to_string()),
            infallible: false,
            measure: None,
        }
    }
}

impl fmt::Display for RuleDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} : {} = ", self.name, self.sort)?;
        match &self.body {
            RuleBody::Rewrite { lhs, rhs, guard } => {
                write!(f, "{lhs} -> {rhs}")?;
                if let Some(g) = guard {
                    write!(f, " where {g}")?;
                }
            }
            RuleBody::Choice(a, b) => write!(f, "choice({a}, {b})")?,
            RuleBody::Seq(a, b) => write!(f, "seq({a}, {b})")?,
        }
        if self.infallible {
            f.write_str(" @infallible")?;
        }
        if let Some(m) = &self.measure {
            let parts: Vec<String> = m.iter().map(|r| r.to_string()).collect();
            write!(f, " @measure({})", parts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{rule}`: {source}")]
    Instantiate { rule: String, source: TermError },
    #[error("rule `{rule}`: guard `{guard}` is not defined")]
    UnknownGuard { rule: String, guard: String },
}

/// Built-in guard predicates with their arity.
pub const GUARDS: &[(&str, usize)] = &[
    ("even_nat", 1),
    ("odd_nat", 1),
    ("lt", 2),
    ("le", 2),
    ("gt", 2),
    ("ge", 2),
    ("eq", 2),
    ("ne", 2),
];

pub fn guard_arity(name: &str) -> Option<usize> {
    GUARDS.iter().find(|(n, _)| *n == name).map(|(_, a)| *a)
}

/// Value of a Peano numeral built from `Succ` and `Zero`.
pub fn peano_value(t: &Term) -> Option<u64> {
    let mut n = 0u64;
    let mut cur = t;
    loop {
        match cur.constr()? {
            "Zero" if cur.is_constant() => return Some(n),
            "Succ" if cur.children().len() == 1 => {
                n += 1;
                cur = &cur.children()[0];
            }
            _ => return None,
        }
    }
}

fn numeric(t: &Term) -> Option<f64> {
    match t.kind() {
        TermKind::Lit { value, .. } => value.as_f64(),
        TermKind::Node { .. } => None,
    }
}

/// Evaluates a guard; arguments outside the predicate's domain make it false.
pub fn eval_guard(pred: &str, args: &[Term]) -> Option<bool> {
    let cmp = |f: fn(f64, f64) -> bool| match args {
        [a, b] => Some(match (numeric(a), numeric(b)) {
            (Some(x), Some(y)) => f(x, y),
            _ => false,
        }),
        _ => None,
    };
    match pred {
        "even_nat" => args.first().map(|t| peano_value(t).is_some_and(|n| n % 2 == 0)),
        "odd_nat" => args.first().map(|t| peano_value(t).is_some_and(|n| n % 2 == 1)),
        "lt" => cmp(|x, y| x < y),
        "le" => cmp(|x, y| x <= y),
        "gt" => cmp(|x, y| x > y),
        "ge" => cmp(|x, y| x >= y),
        "eq" => cmp(|x, y| x == y),
        "ne" => cmp(|x, y| x != y),
        _ => None,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    rules: BTreeMap<String, RuleDef>,
}

impl RuleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a rule; returns the previous definition on a name clash.
    pub fn insert(&mut self, r: RuleDef) -> Option<RuleDef> {
        self.rules.insert(r.name.clone(), r)
    }

    pub fn get(&self, name: &str) -> Option<&RuleDef> {
        self.rules.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.rules.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RuleDef> {
        self.rules.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn sort_of_rule(&self, name: &str) -> Option<&str> {
        self.rules.get(name).map(|r| r.sort.as_str())
    }

    /// Rewrite rules a composite is built from; a plain rule is its own only member.
    pub fn leaf_names(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n.clone()) {
                continue;
            }
            match self.rules.get(&n).map(|r| &r.body) {
                Some(RuleBody::Choice(a, b) | RuleBody::Seq(a, b)) => {
                    stack.push(b.clone());
                    stack.push(a.clone());
                }
                _ => {
                    out.insert(n);
                }
            }
        }
        out
    }

    /// Applies the rule at the root of `t`. `Ok(None)` is failure: the sort differs,
    /// the pattern does not match, or the guard rejects the bindings.
    pub fn apply(&self, sig: &Signature, name: &str, t: &Term) -> Result<Option<Term>, RuleError> {
        let r = self.rules.get(name).ok_or_else(|| RuleError::UnknownRule(name.to_string()))?;
        match sig.sort_of(t) {
            Ok(s) if s == r.sort => {}
            _ => return Ok(None),
        }
        match &r.body {
            RuleBody::Rewrite { lhs, rhs, guard } => {
                let Some(theta) = match_pattern(lhs, t) else {
                    return Ok(None);
                };
                if let Some(g) = guard {
                    let args = g
                        .args
                        .iter()
                        .map(|a| instantiate(a, &theta))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|source| RuleError::Instantiate { rule: r.name.clone(), source })?;
                    let ok = eval_guard(&g.pred, &args)
                        .ok_or_else(|| RuleError::UnknownGuard { rule: r.name.clone(), guard: g.pred.clone() })?;
                    if !ok {
                        return Ok(None);
                    }
                }
                instantiate(rhs, &theta)
                    .map(Some)
                    .map_err(|source| RuleError::Instantiate { rule: r.name.clone(), source })
            }
            RuleBody::Choice(a, b) => match self.apply(sig, a, t)? {
                Some(u) => Ok(Some(u)),
                None => self.apply(sig, b, t),
            },
            RuleBody::Seq(a, b) => match self.apply(sig, a, t)? {
                Some(u) => self.apply(sig, b, &u),
                None => Ok(None),
            },
        }
    }

    /// Load-time checks for every rule. Errors make the rule set unusable.
    pub fn check(&self, sig: &Signature) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for r in self.rules.values() {
            out.extend(check_rule(sig, self, r));
        }
        out.extend(self.composite_cycles());
        out
    }

    fn composite_cycles(&self) -> Vec<Diagnostic> {
        // Depth-first search over composite member edges.
        let mut out = Vec::new();
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        for start in self.rules.keys() {
            if state.contains_key(start.as_str()) {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
            state.insert(start, 1);
            while let Some((n, i)) = stack.pop() {
                let members: Vec<&str> = match self.rules.get(n).map(|r| &r.body) {
                    Some(RuleBody::Choice(a, b) | RuleBody::Seq(a, b)) => vec![a, b],
                    _ => Vec::new(),
                };
                if i < members.len() {
                    stack.push((n, i + 1));
                    let m = members[i];
                    if !self.rules.contains_key(m) {
                        continue;
                    }
                    match state.get(m) {
                        Some(1) => out.push(Diagnostic::error(n, format!("composite rule refers back to itself through `{m}`"))),
                        Some(_) => {}
                        None => {
                            state.insert(m, 1);
                            stack.push((m, 0));
                        }
                    }
                } else {
                    state.insert(n, 2);
                }
            }
        }
        out
    }
}

fn check_rule(sig: &Signature, rules: &RuleSet, r: &RuleDef) -> Vec<Diagnostic> {
    let err = |m: String| Diagnostic::error(&r.name, m);
    let mut out = Vec::new();
    if !sig.has_sort(&r.sort) {
        out.push(err(format!("unknown sort `{}`", r.sort)));
        return out;
    }
    match &r.body {
        RuleBody::Rewrite { lhs, rhs, guard } => {
            let mut vars = BTreeMap::new();
            if lhs.contains_op() {
                out.push(err("arithmetic is only allowed on the right-hand side".into()));
            }
            if let Err(m) = check_pattern(sig, lhs, &r.sort, &mut vars) {
                out.push(err(format!("left-hand side: {m}")));
            }
            let lhs_vars: BTreeSet<&str> = lhs.var_occurrences().into_iter().collect();
            for v in rhs.var_occurrences() {
                if !lhs_vars.contains(v) {
                    out.push(err(format!("variable `{v}` occurs on the right but not on the left")));
                }
            }
            if let Err(m) = check_pattern(sig, rhs, &r.sort, &mut vars) {
                out.push(err(format!("right-hand side: {m}")));
            }
            if let Some(g) = guard {
                match guard_arity(&g.pred) {
                    None => out.push(err(format!("unknown guard `{}`", g.pred))),
                    Some(n) if n != g.args.len() => {
                        out.push(err(format!("guard `{}` takes {n} argument(s), given {}", g.pred, g.args.len())))
                    }
                    Some(_) => {}
                }
                for a in &g.args {
                    for v in a.var_occurrences() {
                        if !lhs_vars.contains(v) {
                            out.push(err(format!("guard variable `{v}` is not bound by the left-hand side")));
                        }
                    }
                }
            }
        }
        RuleBody::Choice(a, b) | RuleBody::Seq(a, b) => {
            for m in [a, b] {
                match rules.get(m) {
                    None => out.push(err(format!("unknown member rule `{m}`"))),
                    Some(mr) if mr.sort != r.sort => out.push(err(format!(
                        "member `{m}` has sort `{}`, expected `{}`",
                        mr.sort, r.sort
                    ))),
                    Some(_) => {}
                }
            }
        }
    }
    out
}

/// Checks that `p` denotes terms of sort `expected`, recording variable sorts in `vars`.
pub fn check_pattern(
    sig: &Signature,
    p: &Pattern,
    expected: &str,
    vars: &mut BTreeMap<String, String>,
) -> Result<(), String> {
    match p {
        Pattern::Var(v) => match vars.get(v) {
            Some(s) if s != expected => Err(format!("variable `{v}` used at sorts `{s}` and `{expected}`")),
            Some(_) => Ok(()),
            None => {
                vars.insert(v.clone(), expected.to_string());
                Ok(())
            }
        },
        Pattern::Node(c, ps) => {
            let sym = sig.symbol(c).ok_or_else(|| format!("unknown constructor `{c}`"))?;
            if sym.result_sort != expected {
                return Err(format!("`{c}` builds `{}`, expected `{expected}`", sym.result_sort));
            }
            if sym.arg_sorts.len() != ps.len() {
                return Err(format!("`{c}` expects {} argument(s), found {}", sym.arg_sorts.len(), ps.len()));
            }
            for (q, s) in ps.iter().zip(sym.arg_sorts.clone()) {
                check_pattern(sig, q, &s, vars)?;
            }
            Ok(())
        }
        Pattern::Lit(v, s) => {
            let kind = sig.prim_kind(s).ok_or_else(|| format!("`{s}` is not a primitive sort"))?;
            if kind != v.kind() {
                return Err(format!("literal {v} is not of kind {kind}"));
            }
            if s != expected {
                return Err(format!("literal of sort `{s}` where `{expected}` is expected"));
            }
            Ok(())
        }
        Pattern::Op(op, ps) => {
            match sig.prim_kind(expected) {
                Some(PrimKind::Int | PrimKind::Float) => {}
                _ => return Err(format!("`{}` needs a numeric sort, found `{expected}`", op.symbol())),
            }
            if ps.len() < 2 {
                return Err(format!("`{}` needs at least two operands", op.symbol()));
            }
            for q in ps {
                check_pattern(sig, q, expected, vars)?;
            }
            Ok(())
        }
    }
}

/// Literal helper for tests and fixtures.
pub fn float_lit(x: f64, sort: &str) -> Pattern {
    Pattern::Lit(Literal::Float(x), sort.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn nat(n: usize) -> Term {
        let mut t = Term::constant("Zero");
        for _ in 0..n {
            t = Term::node("Succ", vec![t]);
        }
        t
    }

    fn parity_rules() -> RuleSet {
        let mut rs = RuleSet::new();
        rs.insert(
            RuleDef::rewrite("atEven", "Nat", Pattern::var("n"), Pattern::node("Succ", vec![Pattern::var("n")]))
                .with_guard("even_nat", vec![Pattern::var("n")]),
        );
        rs.insert(
            RuleDef::rewrite("atOdd", "Nat", Pattern::var("n"), Pattern::node("Succ", vec![Pattern::var("n")]))
                .with_guard("odd_nat", vec![Pattern::var("n")]),
        );
        rs.insert(RuleDef::composite_choice("fix", "Nat", "atEven", "atOdd"));
        rs.insert(RuleDef::composite_seq("twice", "Nat", "atEven", "atOdd"));
        rs
    }

    #[test]
    fn choice_composite_applies_the_first_member_that_fires() {
        let sig = fixtures::nat_tree_signature();
        let rs = parity_rules();
        assert!(rs.check(&sig).is_empty());
        assert_eq!(rs.apply(&sig, "fix", &nat(0)).unwrap(), Some(nat(1)));
        assert_eq!(rs.apply(&sig, "fix", &nat(1)).unwrap(), Some(nat(2)));
        assert_eq!(rs.apply(&sig, "twice", &nat(0)).unwrap(), Some(nat(2)));
        assert_eq!(rs.apply(&sig, "twice", &nat(1)).unwrap(), None);
        assert_eq!(rs.leaf_names("fix"), ["atEven", "atOdd"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn sort_mismatch_is_failure() {
        let sig = fixtures::nat_tree_signature();
        let rs = parity_rules();
        assert_eq!(rs.apply(&sig, "atEven", &Term::constant("True")).unwrap(), None);
        assert!(matches!(rs.apply(&sig, "nope", &nat(0)), Err(RuleError::UnknownRule(_))));
    }

    #[test]
    fn guards_on_literals() {
        let a = Term::lit(Literal::Float(1.0), "Salary");
        let b = Term::lit(Literal::Int(2), "Age");
        assert_eq!(eval_guard("lt", &[a.clone(), b.clone()]), Some(true));
        assert_eq!(eval_guard("ge", &[a.clone(), b]), Some(false));
        assert_eq!(eval_guard("lt", &[a.clone(), nat(3)]), Some(false));
        assert_eq!(eval_guard("lt", &[a]), None);
        assert_eq!(eval_guard("even_nat", &[nat(4)]), Some(true));
        assert_eq!(eval_guard("odd_nat", &[nat(4)]), Some(false));
        assert_eq!(eval_guard("odd_nat", &[Term::constant("True")]), Some(false));
    }

    #[test]
    fn load_checks_catch_ill_formed_rules() {
        let sig = fixtures::nat_tree_signature();
        let mut rs = RuleSet::new();
        rs.insert(RuleDef::rewrite("fresh", "Nat", Pattern::constant("Zero"), Pattern::var("m")));
        rs.insert(RuleDef::rewrite("badsort", "Nat", Pattern::constant("True"), Pattern::constant("Zero")));
        rs.insert(RuleDef::composite_choice("mixed", "Nat", "fresh", "flip"));
        rs.insert(RuleDef::rewrite("flip", "Bool", Pattern::constant("True"), Pattern::constant("False")));
        rs.insert(
            RuleDef::rewrite("g", "Nat", Pattern::var("n"), Pattern::var("n")).with_guard("prime", vec![Pattern::var("n")]),
        );
        let msgs: Vec<String> = rs.check(&sig).iter().map(|d| d.to_string()).collect();
        assert!(msgs.iter().any(|m| m.contains("[fresh]") && m.contains("`m` occurs on the right")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("[badsort]") && m.contains("builds `Bool`")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("[mixed]") && m.contains("member `flip` has sort `Bool`")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("[g]") && m.contains("unknown guard")), "{msgs:?}");
    }

    #[test]
    fn composite_cycles_are_rejected() {
        let sig = fixtures::nat_tree_signature();
        let mut rs = RuleSet::new();
        rs.insert(RuleDef::composite_choice("a", "Nat", "b", "b"));
        rs.insert(RuleDef::composite_seq("b", "Nat", "a", "a"));
        assert!(rs.check(&sig).iter().any(|d| d.message.contains("refers back")));
    }

    #[test]
    fn arithmetic_rule_on_salaries() {
        let sig = fixtures::company_signature();
        let mut rs = RuleSet::new();
        rs.insert(RuleDef::rewrite(
            "incSalary",
            "Salary",
            Pattern::var("s"),
            Pattern::Op(crate::term::PrimOp::Add, vec![Pattern::var("s"), float_lit(1.0, "Salary")]),
        ));
        assert!(rs.check(&sig).is_empty());
        let out = rs.apply(&sig, "incSalary", &Term::lit(Literal::Float(10.0), "Salary")).unwrap();
        assert_eq!(out, Some(Term::lit(Literal::Float(11.0), "Salary")));
    }
}
