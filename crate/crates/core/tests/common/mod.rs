//! Shared test support: proptest generators over the bundled signatures and a
//! reference interpreter written directly from the natural-semantics rules.

#![allow(dead_code)]

use proptest::prelude::*;
use strata::fixtures::{leaf, nat};
use strata::rules::RuleSet;
use strata::signature::Signature;
use strata::strategy::{self as st, Scheme, Strategy as Strat};
use strata::term::{Literal, Term};

pub fn nat_tree(label: Term, kids: Vec<Term>) -> Term {
    let mut list = Term::constant("Nil_NatTree");
    for k in kids.into_iter().rev() {
        list = Term::node("Cons_NatTree", vec![k, list]);
    }
    Term::node("Node", vec![label, list])
}

pub fn bool_tree(label: Term, kids: Vec<Term>) -> Term {
    let mut list = Term::constant("Nil_BoolTree");
    for k in kids.into_iter().rev() {
        list = Term::node("Cons_BoolTree", vec![k, list]);
    }
    Term::node("BNode", vec![label, list])
}

pub fn arb_nat() -> impl Strategy<Value = Term> {
    (0usize..4).prop_map(nat)
}

pub fn arb_bool() -> impl Strategy<Value = Term> {
    prop_oneof![Just(Term::constant("True")), Just(Term::constant("False"))]
}

pub fn arb_nat_tree() -> impl Strategy<Value = Term> {
    arb_nat().prop_map(leaf).prop_recursive(3, 16, 3, |inner| {
        (arb_nat(), prop::collection::vec(inner, 0..3)).prop_map(|(n, kids)| nat_tree(n, kids))
    })
}

pub fn arb_bool_tree() -> impl Strategy<Value = Term> {
    arb_bool().prop_map(|b| bool_tree(b, vec![])).prop_recursive(3, 16, 3, |inner| {
        (arb_bool(), prop::collection::vec(inner, 0..3)).prop_map(|(b, kids)| bool_tree(b, kids))
    })
}

/// Any well-formed term over the Nat/Bool tree signature.
pub fn arb_term() -> impl Strategy<Value = Term> {
    prop_oneof![
        arb_nat(),
        arb_bool(),
        arb_nat_tree(),
        arb_bool_tree(),
        (arb_nat(), arb_nat()).prop_map(|(a, b)| Term::node("Pair", vec![a, b])),
    ]
}

fn arb_atom(rules: Vec<String>) -> BoxedStrategy<Strat> {
    let mut options: Vec<BoxedStrategy<Strat>> = vec![Just(Strat::Id).boxed(), Just(Strat::Fail).boxed()];
    if !rules.is_empty() {
        options.push(prop::sample::select(rules).prop_map(st::rule).boxed());
    }
    prop::strategy::Union::new(options).boxed()
}

/// Closed strategies over `rules`. With `schemes`, traversal schemes appear as nodes.
pub fn arb_strategy(rules: &[&str], schemes: bool) -> BoxedStrategy<Strat> {
    let rules: Vec<String> = rules.iter().map(|s| s.to_string()).collect();
    let leaf = arb_atom(rules.clone());
    leaf.prop_recursive(4, 24, 2, move |inner| {
        let rules = rules.clone();
        let mut options: Vec<BoxedStrategy<Strat>> = vec![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| st::seq(a, b)).boxed(),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| st::choice(a, b)).boxed(),
            inner.clone().prop_map(st::all).boxed(),
            inner.clone().prop_map(st::one).boxed(),
            (inner.clone(), prop::sample::select(rules)).prop_map(|(d, r)| st::adhoc(d, r)).boxed(),
        ];
        if schemes {
            options.push(
                (inner, prop::sample::select(Scheme::ALL.to_vec())).prop_map(|(s, k)| k.apply(s)).boxed(),
            );
        }
        prop::strategy::Union::new(options)
    })
    .boxed()
}

pub const LAW_RULES: &[&str] = &["inc", "dec", "neg", "pos", "prune", "evenUp"];

#[derive(Debug, PartialEq, Eq)]
pub struct OutOfFuel;

/// Big-step evaluation by the inference rules, with recursion unfolded by
/// substitution: `rec v. s` steps to `s[v := rec v. s]`.
pub fn reference_eval(
    sig: &Signature,
    rules: &RuleSet,
    s: &Strat,
    t: &Term,
    fuel: &mut u64,
) -> Result<Option<Term>, OutOfFuel> {
    if *fuel == 0 {
        return Err(OutOfFuel);
    }
    *fuel -= 1;
    match s {
        Strat::Id => Ok(Some(t.clone())),
        Strat::Fail => Ok(None),
        Strat::Seq(a, b) => match reference_eval(sig, rules, a, t, fuel)? {
            Some(u) => reference_eval(sig, rules, b, &u, fuel),
            None => Ok(None),
        },
        Strat::Choice(a, b) => match reference_eval(sig, rules, a, t, fuel)? {
            Some(u) => Ok(Some(u)),
            None => reference_eval(sig, rules, b, t, fuel),
        },
        Strat::All(a) => {
            let mut kids = Vec::new();
            for k in t.children() {
                match reference_eval(sig, rules, a, k, fuel)? {
                    Some(u) => kids.push(u),
                    None => return Ok(None),
                }
            }
            Ok(Some(if kids.is_empty() { t.clone() } else { t.with_children(kids) }))
        }
        Strat::One(a) => {
            for (i, k) in t.children().iter().enumerate() {
                if let Some(u) = reference_eval(sig, rules, a, k, fuel)? {
                    let mut kids = t.children().to_vec();
                    kids[i] = u;
                    return Ok(Some(t.with_children(kids)));
                }
            }
            Ok(None)
        }
        Strat::Rec(v, body) => reference_eval(sig, rules, &body.subst(v, s), t, fuel),
        Strat::Var(v) => panic!("free variable {v} in a closed strategy"),
        Strat::Rule(r) => Ok(rules.apply(sig, r, t).expect("rule application")),
        Strat::Adhoc(d, r) => {
            let case_sort = rules.sort_of_rule(r).expect("declared rule");
            if sig.sort_of(t).ok() == Some(case_sort) {
                Ok(rules.apply(sig, r, t).expect("rule application"))
            } else {
                reference_eval(sig, rules, d, t, fuel)
            }
        }
    }
}

/// Runs `f` on a thread with a large stack, for the recursive reference code.
pub fn with_big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .stack_size(512 << 20)
        .spawn(f)
        .expect("spawn")
        .join()
        .expect("test thread")
}

/// All salary literals of a term in preorder.
pub fn salaries(t: &Term) -> Vec<f64> {
    t.preorder()
        .filter_map(|u| match u.kind() {
            strata::term::TermKind::Lit { value: Literal::Float(x), sort } if &**sort == "Salary" => Some(*x),
            _ => None,
        })
        .collect()
}
