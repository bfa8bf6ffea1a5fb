mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use strata::fallibility::{sf_analyse, sf_type_of, Sf};
use strata::fixtures::laws_program;
use strata::interp::{evaluate, Outcome};
use strata::lattice::fix_eq;
use strata::strategy::{self as st, Scheme, Strategy as Strat};

fn monotone1(f: impl Fn(Sf) -> Sf) -> bool {
    Sf::ALL.iter().all(|&a| Sf::ALL.iter().all(|&b| !a.leq(b) || f(a).leq(f(b))))
}

#[test]
fn lattice_is_a_partial_order_with_lub() {
    for a in Sf::ALL {
        assert!(a.leq(a));
        for b in Sf::ALL {
            let j = a.lub(b);
            assert!(a.leq(j) && b.leq(j));
            assert_eq!(j, b.lub(a));
            for c in Sf::ALL {
                if a.leq(c) && b.leq(c) {
                    assert!(j.leq(c), "lub({a},{b}) = {j} is not below {c}");
                }
                if a.leq(b) && b.leq(c) {
                    assert!(a.leq(c));
                }
            }
            if a.leq(b) && b.leq(a) {
                assert_eq!(a, b);
            }
        }
    }
}

#[test]
fn seq_is_monotone_in_each_argument() {
    for x in Sf::ALL {
        assert!(monotone1(|a| a.seq(x)), "seq(_, {x})");
        assert!(monotone1(|a| x.seq(a)), "seq({x}, _)");
    }
    // Var, All and One are the identity or constant.
    assert!(monotone1(|a| a));
    assert!(monotone1(|_| Sf::ExistsFailure));
}

/// The choice table lets `ForallSuccess` win over `None` but `None` win over `Any`,
/// so raising one operand from `ForallSuccess` to `Any` against a `None` operand drops
/// the result to `None`. These are the only non-monotone points; the table is kept
/// as is because the scheme table depends on `None` absorbing.
#[test]
fn choice_is_monotone_except_where_none_meets_a_raised_forall_success() {
    let mut violations = Vec::new();
    for x in Sf::ALL {
        for a in Sf::ALL {
            for b in Sf::ALL {
                if a.leq(b) && !a.choice(x).leq(b.choice(x)) {
                    violations.push(("left", a, b, x));
                }
                if a.leq(b) && !x.choice(a).leq(x.choice(b)) {
                    violations.push(("right", a, b, x));
                }
            }
        }
    }
    use Sf::{Any, ForallSuccess as Fs};
    assert_eq!(violations, vec![("left", Fs, Any, Sf::None), ("right", Fs, Any, Sf::None)]);
}

/// The adhoc transfer function is not monotone at `None`: `adhoc(None, FS)` is `Any`
/// but `adhoc(FS, FS)` is `FS`. It is only ever applied to a case value of `FS` or `EF`
/// and a default computed below a fixed point, so the check is restricted to `a ≠ None`.
#[test]
fn adhoc_is_monotone_above_bottom() {
    for case in [Sf::ForallSuccess, Sf::ExistsFailure] {
        for a in Sf::ALL.into_iter().filter(|a| *a != Sf::None) {
            for b in Sf::ALL {
                if a.leq(b) {
                    assert!(Sf::adhoc(a, case).leq(Sf::adhoc(b, case)), "adhoc({a},{case}) vs adhoc({b},{case})");
                }
            }
        }
    }
}

/// Every monotone map on the four-point lattice reaches its least fixed point from
/// `None` within four applications (chain height three, plus the confirming step).
#[test]
fn fix_eq_terminates_within_four_iterations() {
    let mut monotone = 0;
    for code in 0..4usize.pow(4) {
        let table: Vec<Sf> = (0..4).map(|i| Sf::ALL[(code / 4usize.pow(i)) % 4]).collect();
        let f = |x: Sf| table[Sf::ALL.iter().position(|y| *y == x).unwrap()];
        if !monotone1(f) {
            continue;
        }
        monotone += 1;
        let fixed = fix_eq(Sf::None, 4, |x| f(*x)).expect("converges");
        assert_eq!(f(fixed), fixed);
        for y in Sf::ALL {
            if f(y) == y {
                assert!(fixed.leq(y), "{fixed} is not the least fixed point");
            }
        }
    }
    assert!(monotone > 0);
}

#[test]
fn fix_eq_examples() {
    assert_eq!(fix_eq(Sf::None, 4, |x| *x), Ok(Sf::None));
    assert_eq!(fix_eq(Sf::None, 4, |x| x.lub(Sf::ExistsFailure)), Ok(Sf::ExistsFailure));
}

fn env(v: Sf) -> BTreeMap<String, Sf> {
    BTreeMap::from([("s".to_string(), v)])
}

fn ctx(v: bool) -> BTreeMap<String, bool> {
    BTreeMap::from([("s".to_string(), v)])
}

#[test]
fn analysis_and_typing_agree_on_the_scheme_rows() {
    let p = laws_program();
    for k in Scheme::ALL {
        let s = k.apply(st::var("s"));
        let analysed = sf_analyse(&s, &env(Sf::ForallSuccess), &p.rules).unwrap();
        let typed = sf_type_of(&s, &ctx(true), false, &p.rules).unwrap();
        if analysed == Sf::ForallSuccess {
            assert_eq!(typed, Some(true), "{}", k.name());
        }
        // And the converse direction on the failing argument.
        let typed_false = sf_type_of(&s, &ctx(false), false, &p.rules).unwrap();
        if typed_false == Some(true) {
            let a = sf_analyse(&s, &env(Sf::ExistsFailure), &p.rules).unwrap();
            assert!(matches!(a, Sf::ForallSuccess | Sf::None), "{}: typed True but analysed {a}", k.name());
        }
    }
}

fn outcome(s: &Strat, t: &strata::term::Term) -> Outcome {
    let p = laws_program();
    evaluate(&p.sig, &p.rules, s, t, 20_000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn analysed_forall_success_never_fails(s in arb_strategy(LAW_RULES, true), t in arb_term()) {
        let p = laws_program();
        let a = sf_analyse(&s, &BTreeMap::new(), &p.rules).unwrap();
        let out = outcome(&s, &t);
        if a == Sf::ForallSuccess {
            prop_assert!(!out.is_failure(), "{} analysed ForallSuccess but failed on {}", s, t);
        }
    }

    #[test]
    fn typed_true_never_fails(s in arb_strategy(LAW_RULES, true), t in arb_term()) {
        let p = laws_program();
        if sf_type_of(&s, &BTreeMap::new(), false, &p.rules).unwrap() == Some(true) {
            prop_assert!(!outcome(&s, &t).is_failure(), "{} typed True but failed on {}", s, t);
        }
    }

    #[test]
    fn strictly_typed_true_never_fails(s in arb_strategy(LAW_RULES, true), t in arb_term()) {
        let p = laws_program();
        if sf_type_of(&s, &BTreeMap::new(), true, &p.rules).unwrap() == Some(true) {
            prop_assert!(!outcome(&s, &t).is_failure(), "{} typed True but failed on {}", s, t);
        }
    }

    #[test]
    fn analysis_is_monotone_in_the_environment(
        s in arb_strategy(LAW_RULES, true),
        a in prop::sample::select(Sf::ALL.to_vec()),
        b in prop::sample::select(Sf::ALL.to_vec()),
    ) {
        // Plug the free variable in at a random-ish place: as an operand of the body.
        let p = laws_program();
        let open = st::choice(st::seq(st::var("s"), s.clone()), st::all(st::var("s")));
        if a.leq(b) {
            let x = sf_analyse(&open, &env(a), &p.rules).unwrap();
            let y = sf_analyse(&open, &env(b), &p.rules).unwrap();
            prop_assert!(x.leq(y), "{} under {}: {} vs {}: {}", open, a, x, b, y);
        }
    }
}
