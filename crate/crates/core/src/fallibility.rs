//! Success and failure behaviour of strategies: an abstract interpretation over a
//! four-point domain, and a boolean type system whose `true` means "never fails".

use std::collections::BTreeMap;
use std::fmt;

use crate::error::AnalysisError;
use crate::lattice::try_fix_eq;
use crate::rules::{RuleBody, RuleSet};
use crate::strategy::{walk_paths, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sf {
    /// No input leads to a result: the strategy diverges everywhere.
    None,
    ForallSuccess,
    ExistsFailure,
    Any,
}

impl Sf {
    pub const ALL: [Sf; 4] = [Sf::None, Sf::ForallSuccess, Sf::ExistsFailure, Sf::Any];

    pub fn leq(self, other: Sf) -> bool {
        self == Sf::None || other == Sf::Any || self == other
    }

    pub fn lub(self, other: Sf) -> Sf {
        match (self, other) {
            (Sf::None, x) | (x, Sf::None) => x,
            (x, y) if x == y => x,
            _ => Sf::Any,
        }
    }

    pub fn seq(self, other: Sf) -> Sf {
        match (self, other) {
            (Sf::None, _) => Sf::None,
            (Sf::ForallSuccess, Sf::None) => Sf::None,
            (Sf::ForallSuccess, Sf::ForallSuccess) => Sf::ForallSuccess,
            (Sf::ForallSuccess, _) => Sf::Any,
            (Sf::ExistsFailure, _) => Sf::ExistsFailure,
            (Sf::Any, _) => Sf::Any,
        }
    }

    pub fn choice(self, other: Sf) -> Sf {
        match (self, other) {
            (Sf::ForallSuccess, _) | (_, Sf::ForallSuccess) => Sf::ForallSuccess,
            (Sf::None, _) | (_, Sf::None) => Sf::None,
            _ => Sf::Any,
        }
    }

    /// Sort dispatch between a default and a case: no backtracking between them.
    pub fn adhoc(default: Sf, case: Sf) -> Sf {
        match (default, case) {
            (Sf::ForallSuccess, Sf::ForallSuccess) => Sf::ForallSuccess,
            (Sf::ExistsFailure, _) | (_, Sf::ExistsFailure) => Sf::ExistsFailure,
            _ => Sf::Any,
        }
    }
}

impl fmt::Display for Sf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sf::None => "None",
            Sf::ForallSuccess => "ForallSuccess",
            Sf::ExistsFailure => "ExistsFailure",
            Sf::Any => "Any",
        })
    }
}

/// Whether the rule, used as an adhoc case, succeeds on every term of its sort: it
/// must be claimed infallible and have a bare variable on the left and no guard.
/// Composites: a choice needs one such member, a sequence needs both.
pub fn case_infallible(rules: &RuleSet, name: &str) -> Result<bool, AnalysisError> {
    fn go(rules: &RuleSet, name: &str, depth: usize) -> Result<bool, AnalysisError> {
        let r = rules.get(name).ok_or_else(|| AnalysisError::UnknownRule(name.to_string()))?;
        if depth > rules.len() {
            return Ok(false);
        }
        Ok(match &r.body {
            RuleBody::Rewrite { lhs, guard, .. } => r.infallible && lhs.is_var() && guard.is_none(),
            RuleBody::Choice(a, b) => go(rules, a, depth + 1)? || go(rules, b, depth + 1)?,
            RuleBody::Seq(a, b) => go(rules, a, depth + 1)? && go(rules, b, depth + 1)?,
        })
    }
    go(rules, name, 0)
}

/// Abstract interpretation. `env` gives values for free variables.
pub fn sf_analyse(s: &Strategy, env: &BTreeMap<String, Sf>, rules: &RuleSet) -> Result<Sf, AnalysisError> {
    let mut scope: Vec<(String, Sf)> = env.iter().map(|(k, v)| (k.clone(), *v)).collect();
    analyse(s, &mut scope, rules)
}

fn analyse(s: &Strategy, scope: &mut Vec<(String, Sf)>, rules: &RuleSet) -> Result<Sf, AnalysisError> {
    Ok(match s {
        Strategy::Id => Sf::ForallSuccess,
        Strategy::Fail => Sf::ExistsFailure,
        Strategy::Seq(a, b) => analyse(a, scope, rules)?.seq(analyse(b, scope, rules)?),
        Strategy::Choice(a, b) => analyse(a, scope, rules)?.choice(analyse(b, scope, rules)?),
        Strategy::Var(v) => scope
            .iter()
            .rev()
            .find(|(k, _)| k == v)
            .map(|(_, x)| *x)
            .ok_or_else(|| AnalysisError::UnboundVar(v.clone()))?,
        Strategy::Rec(v, body) => try_fix_eq(Sf::None, 5, |x: &Sf| {
            scope.push((v.clone(), *x));
            let r = analyse(body, scope, rules);
            scope.pop();
            r
        })?,
        Strategy::All(e) => analyse(e, scope, rules)?,
        Strategy::One(e) => {
            analyse(e, scope, rules)?;
            Sf::ExistsFailure
        }
        Strategy::Rule(r) => {
            if !rules.contains(r) {
                return Err(AnalysisError::UnknownRule(r.clone()));
            }
            Sf::ExistsFailure
        }
        Strategy::Adhoc(d, r) => {
            let case = if case_infallible(rules, r)? { Sf::ForallSuccess } else { Sf::ExistsFailure };
            Sf::adhoc(analyse(d, scope, rules)?, case)
        }
    })
}

/// Result of type inference. `ty` is `None` when the expression is untypable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Typing {
    pub ty: Option<bool>,
    /// Choices whose left operand never fails, so the right operand is dead.
    pub dead_choices: Vec<String>,
}

/// Type inference. With `strict`, a choice whose left operand types `true` is ill-typed.
pub fn sf_type_of(
    s: &Strategy,
    ctx: &BTreeMap<String, bool>,
    strict: bool,
    rules: &RuleSet,
) -> Result<Option<bool>, AnalysisError> {
    Ok(sf_typing(s, ctx, strict, rules)?.ty)
}

pub fn sf_typing(
    s: &Strategy,
    ctx: &BTreeMap<String, bool>,
    strict: bool,
    rules: &RuleSet,
) -> Result<Typing, AnalysisError> {
    let mut scope: Vec<(String, bool)> = ctx.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let mut t = Typer { rules, strict, dead: Vec::new() };
    let ty = t.type_of(s, &mut scope)?;
    // Report dead choices by position in the whole expression.
    let mut paths = Vec::new();
    let marked = t.dead;
    walk_paths(s, &mut String::new(), &mut |p, e| {
        if marked.iter().any(|m| std::ptr::eq(*m, e)) {
            paths.push(p.to_string());
        }
    });
    Ok(Typing { ty, dead_choices: paths })
}

struct Typer<'a, 's> {
    rules: &'a RuleSet,
    strict: bool,
    dead: Vec<&'s Strategy>,
}

impl<'s> Typer<'_, 's> {
    fn type_of(&mut self, s: &'s Strategy, scope: &mut Vec<(String, bool)>) -> Result<Option<bool>, AnalysisError> {
        Ok(match s {
            Strategy::Id => Some(true),
            Strategy::Fail => Some(false),
            Strategy::Seq(a, b) => {
                let x = self.type_of(a, scope)?;
                let y = self.type_of(b, scope)?;
                x.zip(y).map(|(x, y)| x && y)
            }
            Strategy::Choice(a, b) => {
                let x = self.type_of(a, scope)?;
                let y = self.type_of(b, scope)?;
                if x == Some(true) {
                    self.dead.push(s);
                    if self.strict {
                        return Ok(None);
                    }
                }
                x.zip(y).map(|(x, y)| x || y)
            }
            Strategy::Var(v) => Some(
                scope
                    .iter()
                    .rev()
                    .find(|(k, _)| k == v)
                    .map(|(_, x)| *x)
                    .ok_or_else(|| AnalysisError::UnboundVar(v.clone()))?,
            ),
            Strategy::Rec(v, body) => {
                let mark = self.dead.len();
                let mut result = None;
                for assume in [true, false] {
                    scope.push((v.clone(), assume));
                    let got = self.type_of(body, scope);
                    scope.pop();
                    if got? == Some(assume) {
                        result = Some(assume);
                        break;
                    }
                    self.dead.truncate(mark);
                }
                result
            }
            Strategy::All(e) => self.type_of(e, scope)?,
            Strategy::One(e) => self.type_of(e, scope)?.map(|_| false),
            Strategy::Rule(r) => {
                if !self.rules.contains(r) {
                    return Err(AnalysisError::UnknownRule(r.clone()));
                }
                Some(false)
            }
            Strategy::Adhoc(d, r) => {
                let case = case_infallible(self.rules, r)?;
                self.type_of(d, scope)?.map(|d| d && case)
            }
        })
    }
}
