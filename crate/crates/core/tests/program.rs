use strata::fixtures::{self, increment_program, nat, nat_tree_signature};
use strata::interp::{evaluate, Outcome, DEFAULT_FUEL};
use strata::program::{LoadError, Program};
use strata::strategy::{self as st, Strategy as Strat};

fn load(text: &str) -> Result<Program, LoadError> {
    Program::load(nat_tree_signature(), text)
}

fn errors(text: &str) -> String {
    match load(text) {
        Err(e) => e.to_string(),
        Ok(_) => panic!("expected a load error for:\n{text}"),
    }
}

#[test]
fn bundled_programs_load() {
    let p = increment_program();
    assert_eq!(p.main, Some(st::stop_td(st::adhoc(Strat::Fail, "increment"))));
    assert!(p.warnings.is_empty(), "{:?}", p.warnings);
    fixtures::company_program();
    fixtures::laws_program();
}

#[test]
fn undeclared_rule_is_reported() {
    assert!(errors("main = stop_td(adhoc(fail, nope))").contains("unknown rule `nope`"));
}

#[test]
fn family_with_two_cases_of_one_sort_is_rejected() {
    let rules: String = fixtures::INCREMENT_PROGRAM.lines().filter(|l| l.starts_with("rule")).collect::<Vec<_>>().join("\n");
    let text = format!("{rules}\nmain = stop_td(family([atEven, atOdd], fail))");
    let e = errors(&text);
    assert!(e.contains("`atEven`") && e.contains("`atOdd`") && e.contains("`Nat`"), "{e}");
}

#[test]
fn composite_rule_chooses_at_the_sort_level() {
    let p = increment_program();
    let s = p.strategy("stop_td(adhoc(fail, fix))").unwrap();
    let out = evaluate(&p.sig, &p.rules, &s, &fixtures::tree1(), DEFAULT_FUEL).unwrap();
    assert_eq!(out, Outcome::Success(fixtures::leaf(nat(2))));
}

#[test]
fn definitions_expand_with_their_arguments() {
    let text = "rule inc : Nat = n -> (Succ n)\ndef twice(s) = s; s\nmain = twice(twice(inc))";
    let p = load(text).unwrap();
    let out = evaluate(&p.sig, &p.rules, p.main.as_ref().unwrap(), &nat(0), DEFAULT_FUEL).unwrap();
    assert_eq!(out, Outcome::Success(nat(4)));
    assert!(p.warnings.iter().any(|w| w.message.contains("used 2 times")), "{:?}", p.warnings);
}

#[test]
fn sort_errors_in_rules_are_reported() {
    let e = errors("rule bad : Nat = n -> True\nmain = bad");
    assert!(e.contains("bad"), "{e}");
    let e = errors("rule bad : Nat = (Node n ts) -> n\nmain = bad");
    assert!(e.contains("bad"), "{e}");
}

#[test]
fn parse_errors_carry_positions() {
    match load("main = all(id") {
        Err(LoadError::Parse(p)) => assert_eq!((p.line, p.col), (1, 14)),
        other => panic!("{other:?}"),
    }
}
