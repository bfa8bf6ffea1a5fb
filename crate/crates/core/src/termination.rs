//! Termination checking by tracking how strategies relate the measure of their
//! output to that of their input.
//!
//! A measure is a lexicographic tuple of constructor counts followed by term depth.
//! The analysis threads a [`RelVec`] through the expression and admits a recursive
//! call only where the tuple has strictly decreased.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{AnalysisError, Diagnostic};
use crate::rules::{RuleBody, RuleDef, RuleSet};
use crate::strategy::Strategy;
use crate::term::Pattern;

/// Relation between the measure of the current term and the original one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Less,
    Leq,
    Any,
}

impl Rel {
    pub const ALL: [Rel; 3] = [Rel::Less, Rel::Leq, Rel::Any];

    /// `Less ≤ Leq ≤ Any`.
    pub fn leq(self, other: Rel) -> bool {
        self <= other
    }

    pub fn lub(self, other: Rel) -> Rel {
        self.max(other)
    }

    /// Composition: the relation after applying an effect `other` to a term related by `self`.
    pub fn plus(self, other: Rel) -> Rel {
        match (self, other) {
            (Rel::Any, _) | (_, Rel::Any) => Rel::Any,
            (Rel::Leq, Rel::Leq) => Rel::Leq,
            _ => Rel::Less,
        }
    }

    /// Moving to an immediate subterm.
    pub fn decrease(self) -> Rel {
        match self {
            Rel::Leq | Rel::Less => Rel::Less,
            Rel::Any => Rel::Any,
        }
    }

    /// Moving back up to the parent.
    pub fn increase(self) -> Rel {
        match self {
            Rel::Less => Rel::Leq,
            Rel::Leq | Rel::Any => Rel::Any,
        }
    }

    pub fn parse(s: &str) -> Option<Rel> {
        match s {
            "Less" => Some(Rel::Less),
            "Leq" => Some(Rel::Leq),
            "Any" => Some(Rel::Any),
            _ => None,
        }
    }
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rel::Less => "Less",
            Rel::Leq => "Leq",
            Rel::Any => "Any",
        })
    }
}

pub type RelVec = Vec<Rel>;

pub fn show_relvec(r: &[Rel]) -> String {
    let parts: Vec<String> = r.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Component {
    Count(String),
    Depth,
}

/// Count components, most significant first, then depth.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Measure(Vec<Component>);

impl Measure {
    pub fn depth() -> Measure {
        Measure(vec![Component::Depth])
    }

    pub fn counts_then_depth<S: AsRef<str>>(constrs: &[S]) -> Measure {
        let mut v: Vec<Component> = constrs.iter().map(|c| Component::Count(c.as_ref().to_string())).collect();
        v.push(Component::Depth);
        Measure(v)
    }

    pub fn components(&self) -> &[Component] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses `count:C,count:D,depth`.
    pub fn parse(s: &str) -> Result<Measure, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let (last, counts) = parts.split_last().ok_or("empty measure")?;
        if *last != "depth" {
            return Err("the measure must end with `depth`".into());
        }
        let mut v = Vec::new();
        for p in counts {
            match p.strip_prefix("count:") {
                Some(c) if !c.is_empty() => v.push(Component::Count(c.to_string())),
                _ => return Err(format!("expected `count:<Constr>` or a final `depth`, found `{p}`")),
            }
        }
        v.push(Component::Depth);
        Ok(Measure(v))
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|c| match c {
                Component::Count(c) => format!("count:{c}"),
                Component::Depth => "depth".to_string(),
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}

pub fn leqs(m: &Measure) -> RelVec {
    vec![Rel::Leq; m.len()]
}

fn lub_vec(a: &[Rel], b: &[Rel]) -> RelVec {
    a.iter().zip(b).map(|(x, y)| x.lub(*y)).collect()
}

fn plus_vec(a: &[Rel], b: &[Rel]) -> RelVec {
    a.iter().zip(b).map(|(x, y)| x.plus(*y)).collect()
}

pub fn leq_vec(a: &[Rel], b: &[Rel]) -> bool {
    a.iter().zip(b).all(|(x, y)| x.leq(*y))
}

/// Lexicographically strictly below the all-`Leq` vector.
pub fn strictly_decreasing(r: &[Rel]) -> bool {
    for x in r {
        match x {
            Rel::Less => return true,
            Rel::Leq => continue,
            Rel::Any => return false,
        }
    }
    false
}

/// All vectors of length `n`, lexicographic over `[Less, Leq, Any]`, most significant first.
pub fn assumptions(n: usize) -> Vec<RelVec> {
    let mut out: Vec<RelVec> = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                Rel::ALL.into_iter().map(move |r| {
                    let mut v = prefix.clone();
                    v.push(r);
                    v
                })
            })
            .collect();
    }
    out
}

struct Analyzer<'a> {
    n: usize,
    rule_effects: &'a BTreeMap<String, RelVec>,
}

#[derive(Clone)]
struct Binding {
    name: String,
    effect: RelVec,
    recursive: bool,
}

impl Analyzer<'_> {
    fn rule_effect(&self, r: &str) -> Result<&RelVec, AnalysisError> {
        self.rule_effects.get(r).ok_or_else(|| AnalysisError::UnknownRule(r.to_string()))
    }

    fn analyse(&self, s: &Strategy, r: &[Rel], scope: &mut Vec<Binding>) -> Result<Option<RelVec>, AnalysisError> {
        let depth = self.n - 1;
        Ok(match s {
            Strategy::Id => Some(r.to_vec()),
            Strategy::Fail => Some(vec![Rel::Less; self.n]),
            Strategy::Seq(a, b) => match self.analyse(a, r, scope)? {
                Some(r1) => self.analyse(b, &r1, scope)?,
                None => None,
            },
            Strategy::Choice(a, b) => {
                let x = self.analyse(a, r, scope)?;
                let y = self.analyse(b, r, scope)?;
                match (x, y) {
                    (Some(x), Some(y)) => Some(lub_vec(&x, &y)),
                    _ => None,
                }
            }
            Strategy::Var(v) => {
                let b = scope
                    .iter()
                    .rev()
                    .find(|b| b.name == *v)
                    .ok_or_else(|| AnalysisError::UnboundVar(v.clone()))?;
                if b.recursive && !strictly_decreasing(r) {
                    None
                } else {
                    Some(plus_vec(r, &b.effect))
                }
            }
            Strategy::Rec(v, body) => {
                let start = vec![Rel::Leq; self.n];
                let mut found = None;
                for e in assumptions(self.n) {
                    scope.push(Binding { name: v.clone(), effect: e.clone(), recursive: true });
                    let got = self.analyse(body, &start, scope);
                    scope.pop();
                    if let Some(e2) = got? {
                        if leq_vec(&e2, &e) {
                            found = Some(e);
                            break;
                        }
                    }
                }
                found.map(|e| plus_vec(r, &e))
            }
            Strategy::All(e) | Strategy::One(e) => {
                let mut enter = r.to_vec();
                enter[depth] = enter[depth].decrease();
                match self.analyse(e, &enter, scope)? {
                    None => None,
                    Some(out) => {
                        let mut exit = out.clone();
                        exit[depth] = out[depth].increase();
                        if matches!(s, Strategy::All(_)) {
                            // `all` is the identity on constants, so a decrease in the
                            // children is not a decrease of the whole term.
                            for i in 0..depth {
                                exit[i] = if out[i] == Rel::Any { Rel::Any } else { r[i] };
                            }
                        }
                        Some(exit)
                    }
                }
            }
            Strategy::Rule(name) => Some(plus_vec(r, self.rule_effect(name)?)),
            Strategy::Adhoc(d, name) => {
                let case = plus_vec(r, self.rule_effect(name)?);
                self.analyse(d, r, scope)?.map(|x| lub_vec(&x, &case))
            }
        })
    }
}

/// Effects used for rule leaves: the annotation where present, else the checked effect.
pub fn rule_effects(rules: &RuleSet, m: &Measure) -> Result<BTreeMap<String, RelVec>, AnalysisError> {
    let mut out = BTreeMap::new();
    for r in rules.iter() {
        let e = match &r.measure {
            Some(claim) if claim.len() != m.len() => {
                return Err(AnalysisError::LengthMismatch { name: r.name.clone(), expected: m.len(), found: claim.len() })
            }
            Some(claim) => claim.clone(),
            None => rule_effect_check(rules, r, m),
        };
        out.insert(r.name.clone(), e);
    }
    Ok(out)
}

/// Analyses `s` starting from relation `r`. `env` gives the effects of free variables.
/// `Ok(None)` means termination could not be established.
pub fn term_analyse(
    s: &Strategy,
    m: &Measure,
    r: &[Rel],
    env: &BTreeMap<String, RelVec>,
    rules: &RuleSet,
) -> Result<Option<RelVec>, AnalysisError> {
    let effects = rule_effects(rules, m)?;
    term_analyse_with(s, m, r, env, &effects)
}

/// Like [`term_analyse`] with precomputed rule effects.
pub fn term_analyse_with(
    s: &Strategy,
    m: &Measure,
    r: &[Rel],
    env: &BTreeMap<String, RelVec>,
    rule_effects: &BTreeMap<String, RelVec>,
) -> Result<Option<RelVec>, AnalysisError> {
    let n = m.len();
    if r.len() != n {
        return Err(AnalysisError::LengthMismatch { name: "initial relation".into(), expected: n, found: r.len() });
    }
    let mut scope = Vec::new();
    for (k, e) in env {
        if e.len() != n {
            return Err(AnalysisError::LengthMismatch { name: k.clone(), expected: n, found: e.len() });
        }
        scope.push(Binding { name: k.clone(), effect: e.clone(), recursive: false });
    }
    Analyzer { n, rule_effects }.analyse(s, r, &mut scope)
}

pub fn term_type_of(
    s: &Strategy,
    m: &Measure,
    env: &BTreeMap<String, RelVec>,
    rules: &RuleSet,
) -> Result<Option<RelVec>, AnalysisError> {
    term_analyse(s, m, &leqs(m), env, rules)
}

#[derive(Default)]
struct Shape {
    /// Largest `position depth + 1` over non-variable nodes.
    ground: usize,
    /// Per variable: shallowest and deepest position, and multiplicity.
    vars: BTreeMap<String, (usize, usize, usize)>,
}

fn shape(p: &Pattern) -> Shape {
    fn go(p: &Pattern, d: usize, s: &mut Shape) {
        match p {
            Pattern::Var(v) => {
                let e = s.vars.entry(v.clone()).or_insert((d, d, 0));
                e.0 = e.0.min(d);
                e.1 = e.1.max(d);
                e.2 += 1;
            }
            Pattern::Node(_, ps) => {
                s.ground = s.ground.max(d + 1);
                for q in ps {
                    go(q, d + 1, s);
                }
            }
            // Arithmetic evaluates to a literal leaf.
            Pattern::Lit(..) | Pattern::Op(..) => s.ground = s.ground.max(d + 1),
        }
    }
    let mut s = Shape::default();
    go(p, 0, &mut s);
    s
}

fn constr_count(p: &Pattern, c: &str) -> usize {
    match p {
        Pattern::Node(k, ps) => usize::from(k == c) + ps.iter().map(|q| constr_count(q, c)).sum::<usize>(),
        _ => 0,
    }
}

fn depth_effect(lhs: &Pattern, rhs: &Pattern) -> Rel {
    let l = shape(lhs);
    let r = shape(rhs);
    let l_min = l.vars.values().map(|(s, _, _)| s + 1).fold(l.ground, usize::max);
    let mut less = r.ground < l_min;
    let mut leq = r.ground <= l_min;
    for (x, (_, deepest, _)) in &r.vars {
        let Some((shallowest, _, _)) = l.vars.get(x) else {
            return Rel::Any;
        };
        less &= deepest < shallowest;
        leq &= deepest <= shallowest;
    }
    if less {
        Rel::Less
    } else if leq {
        Rel::Leq
    } else {
        Rel::Any
    }
}

fn count_effect(lhs: &Pattern, rhs: &Pattern, c: &str) -> Rel {
    let (l, r) = (shape(lhs), shape(rhs));
    let multiplicities_ok = r
        .vars
        .iter()
        .all(|(x, (_, _, n))| l.vars.get(x).is_some_and(|(_, _, m)| n <= m));
    let (nl, nr) = (constr_count(lhs, c), constr_count(rhs, c));
    if !multiplicities_ok || nr > nl {
        Rel::Any
    } else if nr < nl {
        Rel::Less
    } else {
        Rel::Leq
    }
}

/// Conservative effect of a rule on each measure component.
pub fn rule_effect_check(rules: &RuleSet, rule: &RuleDef, m: &Measure) -> RelVec {
    let mut visiting = Vec::new();
    effect_of(rules, rule, m, &mut visiting)
}

fn effect_of<'a>(rules: &'a RuleSet, rule: &'a RuleDef, m: &Measure, visiting: &mut Vec<&'a str>) -> RelVec {
    if visiting.contains(&rule.name.as_str()) {
        return vec![Rel::Any; m.len()];
    }
    visiting.push(&rule.name);
    let member = |name: &str, visiting: &mut Vec<&'a str>| match rules.get(name) {
        Some(r) => effect_of(rules, r, m, visiting),
        None => vec![Rel::Any; m.len()],
    };
    let out = match &rule.body {
        RuleBody::Rewrite { lhs, rhs, .. } => m
            .components()
            .iter()
            .map(|c| match c {
                Component::Depth => depth_effect(lhs, rhs),
                Component::Count(k) => count_effect(lhs, rhs, k),
            })
            .collect(),
        RuleBody::Choice(a, b) => {
            let (x, y) = (member(a, visiting), member(b, visiting));
            lub_vec(&x, &y)
        }
        RuleBody::Seq(a, b) => {
            let (x, y) = (member(a, visiting), member(b, visiting));
            plus_vec(&x, &y)
        }
    };
    visiting.pop();
    out
}

/// Every measure claim must be at least as weak as what the checker establishes.
pub fn verify_annotations(rules: &RuleSet, m: &Measure) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for r in rules.iter() {
        let Some(claim) = &r.measure else { continue };
        if claim.len() != m.len() {
            out.push(Diagnostic::error(
                &r.name,
                format!("measure claim has {} component(s), measure `{m}` has {}", claim.len(), m.len()),
            ));
            continue;
        }
        let checked = rule_effect_check(rules, r, m);
        if !leq_vec(&checked, claim) {
            out.push(Diagnostic::error(
                &r.name,
                format!(
                    "measure claim {} is stronger than the checked effect {}",
                    show_relvec(claim),
                    show_relvec(&checked)
                ),
            ));
        }
    }
    out
}
