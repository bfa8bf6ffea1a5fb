mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use strata::fixtures::laws_program;
use strata::interp::{evaluate, Outcome};
use strata::laws::Gen;
use strata::rules::RuleSet;
use strata::strategy::{self as st, Scheme, Strategy as Strat};
use strata::term::Term;
use strata::termination::{
    rule_effect_check, rule_effects, term_analyse_with, term_type_of, Component, Measure, Rel, RelVec,
};

/// The scalar analysis, written against its own copy of the relation algebra.
mod scalar {
    use super::Strat;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum R {
        Leq,
        Less,
        Any,
    }

    pub fn le(a: R, b: R) -> bool {
        match (a, b) {
            (_, R::Any) => true,
            (R::Less, R::Leq) => true,
            (x, y) => x == y,
        }
    }

    pub fn lub(a: R, b: R) -> R {
        match (a, b) {
            (R::Less, R::Leq) | (R::Leq, R::Less) => R::Leq,
            (x, y) if x == y => x,
            _ => R::Any,
        }
    }

    pub fn plus(a: R, b: R) -> R {
        match (a, b) {
            (R::Less, R::Less) | (R::Less, R::Leq) | (R::Leq, R::Less) => R::Less,
            (R::Leq, R::Leq) => R::Leq,
            _ => R::Any,
        }
    }

    fn decrease(r: R) -> R {
        match r {
            R::Leq | R::Less => R::Less,
            R::Any => R::Any,
        }
    }

    fn increase(r: R) -> R {
        match r {
            R::Less => R::Leq,
            R::Leq | R::Any => R::Any,
        }
    }

    /// Variables carry an effect and whether they are recursive references.
    pub fn analyse(s: &Strat, env: &[(String, R, bool)], r: R) -> Option<R> {
        match s {
            Strat::Id => Some(r),
            Strat::Fail => Some(R::Less),
            Strat::Seq(a, b) => analyse(a, env, r).and_then(|r1| analyse(b, env, r1)),
            Strat::Choice(a, b) => match (analyse(a, env, r), analyse(b, env, r)) {
                (Some(x), Some(y)) => Some(lub(x, y)),
                _ => None,
            },
            Strat::Var(v) => {
                let (_, e, rec) = env.iter().rev().find(|(k, _, _)| k == v).expect("bound");
                // `r' < Leq` in the partial order holds only for Less.
                if !rec || r == R::Less {
                    Some(plus(r, *e))
                } else {
                    None
                }
            }
            Strat::Rec(v, body) => {
                let attempts = [R::Less, R::Leq, R::Any].into_iter().filter(|&a| {
                    let mut inner = env.to_vec();
                    inner.push((v.clone(), a, true));
                    analyse(body, &inner, R::Leq).is_some_and(|got| le(got, a))
                });
                attempts.into_iter().next().map(|a| plus(r, a))
            }
            Strat::All(e) | Strat::One(e) => analyse(e, env, decrease(r)).map(increase),
            Strat::Rule(_) | Strat::Adhoc(..) => unreachable!("the scalar listing has no rules"),
        }
    }
}

fn to_scalar(r: Rel) -> scalar::R {
    match r {
        Rel::Less => scalar::R::Less,
        Rel::Leq => scalar::R::Leq,
        Rel::Any => scalar::R::Any,
    }
}

fn depth_type(s: &Strat, env: &[(&str, Rel)]) -> Option<Rel> {
    let env: BTreeMap<String, RelVec> = env.iter().map(|(k, r)| (k.to_string(), vec![*r])).collect();
    term_type_of(s, &Measure::depth(), &env, &RuleSet::new()).unwrap().map(|v| {
        assert_eq!(v.len(), 1);
        v[0]
    })
}

fn scalar_type(s: &Strat, env: &[(&str, Rel)]) -> Option<scalar::R> {
    let env: Vec<(String, scalar::R, bool)> = env.iter().map(|(k, r)| (k.to_string(), to_scalar(*r), false)).collect();
    scalar::analyse(s, &env, scalar::R::Leq)
}

fn arb_open_strategy() -> BoxedStrategy<Strat> {
    let leaf = prop_oneof![Just(Strat::Id), Just(Strat::Fail), Just(st::var("a")), Just(st::var("b"))];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| st::seq(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| st::choice(a, b)),
            inner.clone().prop_map(st::all),
            inner.clone().prop_map(st::one),
            (inner, prop::sample::select(Scheme::ALL.to_vec())).prop_map(|(s, k)| k.apply(s)),
        ]
    })
    .boxed()
}

fn arb_rel() -> impl Strategy<Value = Rel> {
    prop::sample::select(Rel::ALL.to_vec())
}

#[test]
fn rel_algebra_laws_hold_exhaustively() {
    let all = Rel::ALL;
    for a in all {
        assert!(a.leq(a));
        assert!(a.increase().leq(Rel::Any) && a.decrease().leq(a));
        assert!(a.leq(a.decrease().increase()), "increase(decrease({a}))");
        assert!(a.leq(a.increase().decrease()), "decrease(increase({a}))");
        for b in all {
            assert_eq!(a.plus(b), b.plus(a));
            assert_eq!(a.lub(b), b.lub(a));
            assert!(a.leq(a.lub(b)));
            for c in all {
                assert_eq!(a.plus(b).plus(c), a.plus(b.plus(c)));
                assert_eq!(a.lub(b).lub(c), a.lub(b.lub(c)));
                if a.leq(b) {
                    assert!(a.plus(c).leq(b.plus(c)), "plus({a},{c}) vs plus({b},{c})");
                    assert!(a.lub(c).leq(b.lub(c)));
                }
            }
        }
    }
}

#[test]
fn rel_operations_match_the_scalar_copy() {
    for a in Rel::ALL {
        for b in Rel::ALL {
            assert_eq!(to_scalar(a.plus(b)), scalar::plus(to_scalar(a), to_scalar(b)));
            assert_eq!(to_scalar(a.lub(b)), scalar::lub(to_scalar(a), to_scalar(b)));
            assert_eq!(a.leq(b), scalar::le(to_scalar(a), to_scalar(b)));
        }
    }
}

#[test]
fn scheme_library_agrees_with_the_scalar_listing() {
    for k in Scheme::ALL {
        for arg in Rel::ALL {
            let s = k.apply(st::var("a"));
            let env = [("a", arg)];
            assert_eq!(depth_type(&s, &env).map(to_scalar), scalar_type(&s, &env), "{} with {arg}", k.name());
            for k2 in Scheme::ALL {
                let nested = k.apply(k2.apply(st::var("a")));
                assert_eq!(
                    depth_type(&nested, &env).map(to_scalar),
                    scalar_type(&nested, &env),
                    "{}({}) with {arg}",
                    k.name(),
                    k2.name()
                );
            }
        }
    }
}

fn measure_of(m: &Measure, t: &Term) -> Vec<usize> {
    m.components()
        .iter()
        .map(|c| match c {
            Component::Count(c) => t.count(c),
            Component::Depth => t.depth(),
        })
        .collect()
}

/// Componentwise: `Less` means the component went down, `Leq` that it did not go up.
fn respects(e: &[Rel], before: &[usize], after: &[usize]) -> bool {
    e.iter().zip(before.iter().zip(after)).all(|(r, (b, a))| match r {
        Rel::Less => a < b,
        Rel::Leq => a <= b,
        Rel::Any => true,
    })
}

fn measures() -> Vec<Measure> {
    vec![
        Measure::depth(),
        Measure::counts_then_depth(&["Succ"]),
        Measure::counts_then_depth(&["Node", "Succ"]),
        Measure::counts_then_depth(&["Cons_NatTree"]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn depth_analysis_agrees_with_the_scalar_listing(s in arb_open_strategy(), a in arb_rel(), b in arb_rel()) {
        let env = [("a", a), ("b", b)];
        prop_assert_eq!(depth_type(&s, &env).map(to_scalar), scalar_type(&s, &env), "{}", s);
    }

    #[test]
    fn analysis_is_monotone_in_the_start_relation(s in arb_open_strategy(), a in arb_rel(), r in arb_rel(), r2 in arb_rel()) {
        let env: BTreeMap<String, RelVec> = [("a", a), ("b", a)].iter().map(|(k, r)| (k.to_string(), vec![*r])).collect();
        let m = Measure::depth();
        let effects = BTreeMap::new();
        if r.leq(r2) {
            let x = term_analyse_with(&s, &m, &[r], &env, &effects).unwrap();
            let y = term_analyse_with(&s, &m, &[r2], &env, &effects).unwrap();
            if let (Some(x), Some(y)) = (x, y) {
                prop_assert!(x[0].leq(y[0]), "{} from {}: {:?} vs from {}: {:?}", s, r, x, r2, y);
            }
        }
    }

    #[test]
    fn checked_rule_effects_are_sound(t in arb_term(), rule in prop::sample::select(LAW_RULES.to_vec())) {
        let p = laws_program();
        let r = p.rules.get(rule).unwrap();
        if let Ok(Some(u)) = p.rules.apply(&p.sig, rule, &t) {
            for m in measures() {
                let e = rule_effect_check(&p.rules, r, &m);
                prop_assert!(respects(&e, &measure_of(&m, &t), &measure_of(&m, &u)), "{} {} on {} gave {}", rule, m, t, u);
            }
        }
    }
}

/// Typable strategies over honestly-annotated rules terminate, and their inferred
/// effect holds between input and output.
#[test]
fn typable_strategies_terminate_and_respect_their_effect() {
    let p = laws_program();
    for r in p.rules.iter() {
        assert!(r.measure.is_none(), "the law rules carry no measure claims");
    }
    let mut g = Gen::new(&p, 0x7e57);
    let measures = measures();
    let effects: Vec<_> = measures.iter().map(|m| rule_effects(&p.rules, m).unwrap()).collect();
    let env = BTreeMap::new();
    let (mut runs, mut generated) = (0, 0);
    let mut per_measure = vec![0; measures.len()];
    while runs < 10_000 {
        generated += 1;
        assert!(generated < 2_000_000, "too few typable strategies");
        let size = g.rng().gen_range(1..=6);
        let s = g.strategy(size, true);
        let i = g.rng().gen_range(0..measures.len());
        let m = &measures[i];
        let Some(effect) = term_analyse_with(&s, m, &vec![Rel::Leq; m.len()], &env, &effects[i]).unwrap() else {
            continue;
        };
        let t = g.term(5);
        runs += 1;
        per_measure[i] += 1;
        match evaluate(&p.sig, &p.rules, &s, &t, 1_000_000).unwrap() {
            Outcome::FuelExhausted { .. } => panic!("{s} is typable under {m} but diverged on {t}"),
            Outcome::Success(u) => {
                assert!(respects(&effect, &measure_of(m, &t), &measure_of(m, &u)), "{s} : {effect:?} under {m}: {t} -> {u}")
            }
            Outcome::Failure => {}
        }
    }
    assert!(per_measure.iter().all(|n| *n > 1_000), "{per_measure:?}");
}

#[test]
fn divergent_scheme_instances_are_rejected() {
    let p = laws_program();
    let m = Measure::depth();
    let env = BTreeMap::new();
    for (s, t) in [
        (st::full_td(st::adhoc(Strat::Id, "inc")), fixtures_tree()),
        (st::repeat(st::rule("inc")), strata::fixtures::nat(0)),
        (st::innermost(st::rule("inc")), strata::fixtures::nat(0)),
    ] {
        assert_eq!(term_type_of(&s, &m, &env, &p.rules).unwrap(), None, "{s}");
        assert!(matches!(evaluate(&p.sig, &p.rules, &s, &t, 50_000).unwrap(), Outcome::FuelExhausted { .. }), "{s}");
    }
}

fn fixtures_tree() -> Term {
    nat_tree(strata::fixtures::nat(1), vec![strata::fixtures::leaf(strata::fixtures::nat(0))])
}
