//! Which type-specific cases a strategy may exercise, per sort of the input term.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::AnalysisError;
use crate::lattice::try_fix_eq;
use crate::rules::RuleSet;
use crate::signature::Signature;
use crate::strategy::Strategy;

/// Total map from the signature's sorts to sets of case names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachMap(BTreeMap<String, BTreeSet<String>>);

impl ReachMap {
    pub fn bottom(sig: &Signature) -> ReachMap {
        ReachMap(sig.sorts().iter().map(|s| (s.clone(), BTreeSet::new())).collect())
    }

    /// Maps every sort to `cases`.
    pub fn constant(sig: &Signature, cases: &BTreeSet<String>) -> ReachMap {
        ReachMap(sig.sorts().iter().map(|s| (s.clone(), cases.clone())).collect())
    }

    /// `sort ↦ cases`, everything else empty.
    pub fn single(sig: &Signature, sort: &str, cases: BTreeSet<String>) -> ReachMap {
        let mut m = ReachMap::bottom(sig);
        if let Some(e) = m.0.get_mut(sort) {
            *e = cases;
        }
        m
    }

    pub fn get(&self, sort: &str) -> Option<&BTreeSet<String>> {
        self.0.get(sort)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn lub(&self, other: &ReachMap) -> ReachMap {
        let mut out = self.clone();
        for (k, v) in &other.0 {
            out.0.entry(k.clone()).or_default().extend(v.iter().cloned());
        }
        out
    }

    pub fn leq(&self, other: &ReachMap) -> bool {
        self.0.iter().all(|(k, v)| other.0.get(k).is_some_and(|w| v.is_subset(w)))
    }

    /// Sorts that map to a non-empty set.
    pub fn support(&self) -> BTreeSet<&str> {
        self.0.iter().filter(|(_, v)| !v.is_empty()).map(|(k, _)| k.as_str()).collect()
    }
}

impl fmt::Display for ReachMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            let cases: Vec<&str> = v.iter().map(String::as_str).collect();
            writeln!(f, "{k}: {{{}}}", cases.join(", "))?;
        }
        Ok(())
    }
}

/// One layer down: a sort reaches whatever its argument sorts reach.
pub fn reach_transform(sig: &Signature, m: &ReachMap) -> ReachMap {
    let mut out = ReachMap::bottom(sig);
    for (so, cases) in out.0.iter_mut() {
        for a in sig.arg_sorts_of_sort(so).unwrap_or_default() {
            if let Some(c) = m.0.get(&a) {
                cases.extend(c.iter().cloned());
            }
        }
    }
    out
}

fn rule_map(sig: &Signature, rules: &RuleSet, name: &str) -> Result<ReachMap, AnalysisError> {
    let r = rules.get(name).ok_or_else(|| AnalysisError::UnknownRule(name.to_string()))?;
    Ok(ReachMap::single(sig, &r.sort, rules.leaf_names(name)))
}

pub fn reach_analyse(
    sig: &Signature,
    rules: &RuleSet,
    s: &Strategy,
    env: &BTreeMap<String, ReachMap>,
) -> Result<ReachMap, AnalysisError> {
    let mut scope: Vec<(String, ReachMap)> = env.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    // Height of the lattice: every case in every sort.
    let cases: BTreeSet<String> = s
        .rule_names()
        .iter()
        .flat_map(|r| rules.leaf_names(r))
        .chain(env.values().flat_map(|m| m.0.values().flatten().cloned()))
        .collect();
    let cap = sig.sorts().len() * cases.len() + 2;
    analyse(sig, rules, s, &mut scope, cap)
}

fn analyse(
    sig: &Signature,
    rules: &RuleSet,
    s: &Strategy,
    scope: &mut Vec<(String, ReachMap)>,
    cap: usize,
) -> Result<ReachMap, AnalysisError> {
    Ok(match s {
        Strategy::Id | Strategy::Fail => ReachMap::bottom(sig),
        Strategy::Seq(a, b) | Strategy::Choice(a, b) => {
            analyse(sig, rules, a, scope, cap)?.lub(&analyse(sig, rules, b, scope, cap)?)
        }
        Strategy::Var(v) => scope
            .iter()
            .rev()
            .find(|(k, _)| k == v)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| AnalysisError::UnboundVar(v.clone()))?,
        Strategy::Rec(v, body) => try_fix_eq(ReachMap::bottom(sig), cap, |x: &ReachMap| {
            scope.push((v.clone(), x.clone()));
            let r = analyse(sig, rules, body, scope, cap);
            scope.pop();
            r
        })?,
        Strategy::All(e) | Strategy::One(e) => reach_transform(sig, &analyse(sig, rules, e, scope, cap)?),
        Strategy::Rule(r) => rule_map(sig, rules, r)?,
        Strategy::Adhoc(d, r) => analyse(sig, rules, d, scope, cap)?.lub(&rule_map(sig, rules, r)?),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadCase {
    pub case: String,
    pub root: String,
}

impl fmt::Display for DeadCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case `{}` is unreachable from root sort `{}`", self.case, self.root)
    }
}

pub const OVER_REPORT_NOTE: &str =
    "note: the analysis ignores whether traversals succeed, so it may over-report reachable cases";

/// Cases mentioned in `main` that cannot fire on any term of sort `root`.
pub fn dead_case_report(
    sig: &Signature,
    rules: &RuleSet,
    main: &Strategy,
    root: &str,
) -> Result<Vec<DeadCase>, AnalysisError> {
    if !sig.has_sort(root) {
        return Err(AnalysisError::UnknownSort(root.to_string()));
    }
    let m = reach_analyse(sig, rules, main, &BTreeMap::new())?;
    let reached = m.get(root).cloned().unwrap_or_default();
    let mentioned: BTreeSet<String> = main.rule_names().iter().flat_map(|r| rules.leaf_names(r)).collect();
    Ok(mentioned
        .into_iter()
        .filter(|c| !reached.contains(c))
        .map(|case| DeadCase { case, root: root.to_string() })
        .collect())
}
