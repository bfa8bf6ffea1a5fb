//! Big-step evaluation of strategies with a step budget.

use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::rules::{RuleError, RuleSet};
use crate::signature::Signature;
use crate::strategy::Strategy;
use crate::term::{with_stack, Term};

pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success(Term),
    Failure,
    /// The budget ran out after `steps` steps; the strategy may diverge.
    FuelExhausted { steps: u64 },
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success(_))
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Outcome::Failure)
    }

    pub fn term(&self) -> Option<&Term> {
        match self {
            Outcome::Success(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Success(t) => write!(f, "{t}"),
            Outcome::Failure => f.write_str("FAIL"),
            Outcome::FuelExhausted { steps } => write!(f, "DIVERGENT? steps={steps}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound strategy variable `{0}`")]
    UnboundVar(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// Closure environment: each frame binds a recursion variable to its `rec` node and
/// the environment that node was evaluated in.
struct Frame<'s> {
    name: &'s str,
    body: &'s Strategy,
    outer: Env<'s>,
}

type Env<'s> = Option<Rc<Frame<'s>>>;

enum Stop {
    Fuel,
    Error(EvalError),
}

impl From<RuleError> for Stop {
    fn from(e: RuleError) -> Self {
        Stop::Error(e.into())
    }
}

type OnFire<'a> = dyn FnMut(&str, &Term) + 'a;

struct Machine<'a> {
    sig: &'a Signature,
    rules: &'a RuleSet,
    fuel: u64,
    steps: u64,
    trace: Option<&'a mut OnFire<'a>>,
}

impl<'a> Machine<'a> {
    fn tick(&mut self) -> Result<(), Stop> {
        if self.steps >= self.fuel {
            return Err(Stop::Fuel);
        }
        self.steps += 1;
        Ok(())
    }

    fn apply_rule(&mut self, name: &str, t: &Term) -> Result<Option<Term>, Stop> {
        let out = self.rules.apply(self.sig, name, t)?;
        if out.is_some() {
            if let Some(trace) = self.trace.as_mut() {
                trace(name, t);
            }
        }
        Ok(out)
    }

    fn eval<'s>(&mut self, s: &'s Strategy, env: &Env<'s>, t: &Term) -> Result<Option<Term>, Stop> {
        with_stack(|| self.eval_inner(s, env, t))
    }

    fn eval_inner<'s>(&mut self, s: &'s Strategy, env: &Env<'s>, t: &Term) -> Result<Option<Term>, Stop> {
        self.tick()?;
        match s {
            Strategy::Id => Ok(Some(t.clone())),
            Strategy::Fail => Ok(None),
            Strategy::Seq(a, b) => match self.eval(a, env, t)? {
                Some(u) => self.eval(b, env, &u),
                None => Ok(None),
            },
            Strategy::Choice(a, b) => match self.eval(a, env, t)? {
                Some(u) => Ok(Some(u)),
                None => self.eval(b, env, t),
            },
            Strategy::All(e) => {
                let kids = t.children();
                if kids.is_empty() {
                    return Ok(Some(t.clone()));
                }
                let mut out = Vec::with_capacity(kids.len());
                let mut changed = false;
                for k in kids {
                    match self.eval(e, env, k)? {
                        Some(u) => {
                            changed |= !u.ptr_eq(k);
                            out.push(u);
                        }
                        None => return Ok(None),
                    }
                }
                Ok(Some(if changed { t.with_children(out) } else { t.clone() }))
            }
            Strategy::One(e) => {
                let kids = t.children();
                for (i, k) in kids.iter().enumerate() {
                    if let Some(u) = self.eval(e, env, k)? {
                        let mut out = kids.to_vec();
                        out[i] = u;
                        return Ok(Some(t.with_children(out)));
                    }
                }
                Ok(None)
            }
            Strategy::Rec(v, body) => {
                let frame = Rc::new(Frame { name: v, body, outer: env.clone() });
                self.eval(body, &Some(frame), t)
            }
            Strategy::Var(v) => {
                let mut cur = env.as_ref();
                while let Some(f) = cur {
                    if f.name == v {
                        let f = f.clone();
                        return self.eval(f.body, &Some(f.clone()), t);
                    }
                    cur = f.outer.as_ref();
                }
                Err(Stop::Error(EvalError::UnboundVar(v.clone())))
            }
            Strategy::Rule(r) => self.apply_rule(r, t),
            Strategy::Adhoc(d, r) => {
                let rule_sort = self
                    .rules
                    .sort_of_rule(r)
                    .ok_or_else(|| Stop::Error(RuleError::UnknownRule(r.clone()).into()))?;
                if self.sig.sort_of(t).is_ok_and(|s| s == rule_sort) {
                    self.apply_rule(r, t)
                } else {
                    self.eval(d, env, t)
                }
            }
        }
    }
}

fn finish(m: &Machine<'_>, r: Result<Option<Term>, Stop>) -> Result<Outcome, EvalError> {
    match r {
        Ok(Some(t)) => Ok(Outcome::Success(t)),
        Ok(None) => Ok(Outcome::Failure),
        Err(Stop::Fuel) => Ok(Outcome::FuelExhausted { steps: m.steps }),
        Err(Stop::Error(e)) => Err(e),
    }
}

/// Runs `s` on `t`. Every evaluation step, including the unfolding of a recursion
/// variable, consumes one unit of `fuel`.
pub fn evaluate(sig: &Signature, rules: &RuleSet, s: &Strategy, t: &Term, fuel: u64) -> Result<Outcome, EvalError> {
    let mut m = Machine { sig, rules, fuel, steps: 0, trace: None };
    let r = m.eval(s, &None, t);
    finish(&m, r)
}

/// Like [`evaluate`], calling `on_fire(rule, input)` each time a rule succeeds.
pub fn evaluate_traced(
    sig: &Signature,
    rules: &RuleSet,
    s: &Strategy,
    t: &Term,
    fuel: u64,
    on_fire: &mut dyn FnMut(&str, &Term),
) -> Result<Outcome, EvalError> {
    let mut m = Machine { sig, rules, fuel, steps: 0, trace: Some(on_fire) };
    let r = m.eval(s, &None, t);
    finish(&m, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rules::RuleDef;
    use crate::strategy::{adhoc, all, full_bu, one, rule, seq, var};
    use crate::term::Pattern;

    fn nat(n: usize) -> Term {
        let mut t = Term::constant("Zero");
        for _ in 0..n {
            t = Term::node("Succ", vec![t]);
        }
        t
    }

    fn setup() -> (Signature, RuleSet) {
        let mut rs = RuleSet::new();
        rs.insert(RuleDef::rewrite("inc", "Nat", Pattern::var("n"), Pattern::node("Succ", vec![Pattern::var("n")])));
        rs.insert(RuleDef::rewrite("dec", "Nat", Pattern::node("Succ", vec![Pattern::var("n")]), Pattern::var("n")));
        (fixtures::nat_tree_signature(), rs)
    }

    fn run(s: &Strategy, t: &Term) -> Outcome {
        let (sig, rs) = setup();
        evaluate(&sig, &rs, s, t, DEFAULT_FUEL).unwrap()
    }

    #[test]
    fn constant_term_facts() {
        assert_eq!(run(&Strategy::Id, &nat(2)), Outcome::Success(nat(2)));
        assert_eq!(run(&all(Strategy::Fail), &nat(0)), Outcome::Success(nat(0)));
        assert_eq!(run(&one(Strategy::Id), &nat(0)), Outcome::Failure);
        assert_eq!(run(&Strategy::Fail, &nat(0)), Outcome::Failure);
    }

    #[test]
    fn rules_and_sequencing() {
        assert_eq!(run(&seq(rule("inc"), rule("inc")), &nat(0)), Outcome::Success(nat(2)));
        assert_eq!(run(&rule("dec"), &nat(0)), Outcome::Failure);
        assert_eq!(run(&crate::strategy::choice(rule("dec"), Strategy::Id), &nat(0)), Outcome::Success(nat(0)));
        assert_eq!(run(&rule("inc"), &Term::constant("True")), Outcome::Failure);
        assert_eq!(run(&adhoc(Strategy::Id, "inc"), &Term::constant("True")), Outcome::Success(Term::constant("True")));
    }

    #[test]
    fn one_changes_only_the_leftmost_success() {
        let t = Term::node("Node", vec![nat(1), Term::constant("Nil_NatTree")]);
        let out = run(&one(rule("dec")), &t);
        assert_eq!(out, Outcome::Success(Term::node("Node", vec![nat(0), Term::constant("Nil_NatTree")])));
        let two = Term::node("Pair", vec![nat(1), nat(1)]);
        let out = run(&one(rule("dec")), &two);
        assert_eq!(out, Outcome::Success(Term::node("Pair", vec![nat(0), nat(1)])));
    }

    #[test]
    fn fuel_exhaustion_is_reported_with_steps() {
        let (sig, rs) = setup();
        let loop_ = crate::strategy::rec("v", var("v"));
        assert_eq!(evaluate(&sig, &rs, &loop_, &nat(0), 100).unwrap(), Outcome::FuelExhausted { steps: 100 });
        let out = evaluate(&sig, &rs, &Strategy::Id, &nat(0), 1).unwrap();
        assert_eq!(out, Outcome::Success(nat(0)));
        assert_eq!(evaluate(&sig, &rs, &Strategy::Id, &nat(0), 0).unwrap(), Outcome::FuelExhausted { steps: 0 });
    }

    #[test]
    fn errors_are_not_failures() {
        let (sig, rs) = setup();
        assert_eq!(
            evaluate(&sig, &rs, &var("z"), &nat(0), 10),
            Err(EvalError::UnboundVar("z".into()))
        );
        assert!(matches!(evaluate(&sig, &rs, &rule("nope"), &nat(0), 10), Err(EvalError::Rule(_))));
    }

    #[test]
    fn deep_terms_are_traversed_without_overflow() {
        let n = 100_000;
        let t = nat(n);
        // Bottom-up identity over every node, then a decrement at the root.
        let s = seq(full_bu(Strategy::Id), rule("dec"));
        assert_eq!(run(&s, &t), Outcome::Success(nat(n - 1)));
        let s = full_bu(adhoc(Strategy::Id, "inc"));
        let out = run(&s, &nat(50_000));
        assert_eq!(out.term().map(|t| t.depth()), Some(50_000 * 2 + 2));
    }
}
