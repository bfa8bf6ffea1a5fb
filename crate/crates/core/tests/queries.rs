mod common;

use common::*;
use proptest::prelude::*;
use strata::fixtures::{self, company_program};
use strata::laws::Gen;
use strata::program::Program;
use strata::query::{familyq, run_query, Monoid, QueryExpr, Value};
use strata::term::{Literal, Term, TermKind};

fn company_term(seed: u64, depth: usize) -> Term {
    let p = company_program();
    Gen::new(&p, seed).term_of("Company", depth).unwrap()
}

fn run(p: &Program, q: &str, t: &Term, m: Monoid) -> Option<Value> {
    let q = p.query_expr(q).unwrap();
    run_query(&p.sig, &p.qrules, &q, t, m).unwrap()
}

fn floats(xs: &[f64]) -> Value {
    Value::List(xs.iter().map(|x| Value::Float(*x)).collect())
}

fn salary_of_employee(t: &Term) -> f64 {
    match t.children()[1].kind() {
        TermKind::Lit { value: Literal::Float(x), .. } => *x,
        other => panic!("not a salary: {other:?}"),
    }
}

/// Salaries of employees that are not below a manager, by direct recursion.
fn non_manager_salaries(t: &Term, out: &mut Vec<f64>) {
    match t.constr() {
        Some("Manager") => out.push(0.0),
        Some("Employee") => out.push(salary_of_employee(t)),
        _ => t.children().iter().for_each(|c| non_manager_salaries(c, out)),
    }
}

fn employee_salaries_preorder(t: &Term) -> Vec<f64> {
    t.preorder().filter(|u| u.constr() == Some("Employee")).map(salary_of_employee).collect()
}

#[test]
fn scenarios_on_the_sample_company() {
    let p = company_program();
    let c0 = fixtures::c0();
    assert_eq!(run(&p, "full_cl(adhocq(failq, salary))", &c0, Monoid::FloatSum), Some(Value::Float(130.0)));
    assert_eq!(
        run(&p, "stop_cl(familyq([employee, manager], failq))", &c0, Monoid::FloatSum),
        Some(Value::Float(30.0))
    );
    assert_eq!(run(&p, "full_cl(adhocq(failq, salary))", &c0, Monoid::List), Some(floats(&[100.0, 10.0, 20.0])));
    assert_eq!(run(&p, "once_cl(adhocq(failq, employee))", &c0, Monoid::List), Some(Value::Float(100.0)));
    let q = p.query_expr("full_cl(adhocq(failq, employee))").unwrap();
    assert!(run_query(&p.sig, &p.qrules, &q, &c0, Monoid::Count).is_err(), "float results do not fit a count");
}

#[test]
fn once_over_a_term_without_the_sort_has_no_result() {
    let p = company_program();
    let q = familyq(&["salary"], QueryExpr::Fail);
    let t = Term::node("Company", vec![Term::constant("Nil_Department")]);
    assert_eq!(run_query(&p.sig, &p.qrules, &QueryExpr::OnceCl(Box::new(q)), &t, Monoid::FloatSum).unwrap(), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn full_cl_lists_the_preorder_results(seed in any::<u64>()) {
        let p = company_program();
        let t = company_term(seed, 7);
        prop_assert_eq!(run(&p, "full_cl(adhocq(failq, salary))", &t, Monoid::List), Some(floats(&salaries(&t))));
        prop_assert_eq!(
            run(&p, "full_cl(adhocq(failq, employee))", &t, Monoid::List),
            Some(floats(&employee_salaries_preorder(&t)))
        );
    }

    #[test]
    fn stop_cl_is_bounded_by_full_cl(seed in any::<u64>()) {
        let p = company_program();
        let t = company_term(seed, 7);
        let all: f64 = salaries(&t).iter().sum();
        prop_assert!(salaries(&t).iter().all(|x| *x >= 0.0));
        let full = run(&p, "full_cl(adhocq(failq, salary))", &t, Monoid::FloatSum);
        prop_assert_eq!(&full, &Some(Value::Float(all)));
        for q in ["stop_cl(familyq([employee, manager], failq))", "stop_cl(adhocq(failq, employee))", "stop_cl(adhocq(failq, salary))"] {
            let Some(Value::Float(stop)) = run(&p, q, &t, Monoid::FloatSum) else { panic!("{q}") };
            prop_assert!(stop <= all, "{}: {} > {}", q, stop, all);
        }
        let mut expected = Vec::new();
        non_manager_salaries(&t, &mut expected);
        prop_assert_eq!(
            run(&p, "stop_cl(familyq([employee, manager], failq))", &t, Monoid::FloatSum),
            Some(Value::Float(expected.iter().sum()))
        );
    }

    #[test]
    fn once_cl_is_the_head_of_stop_cl(seed in any::<u64>(), q in prop::sample::select(vec![
        "adhocq(failq, salary)",
        "adhocq(failq, employee)",
        "familyq([employee, manager], failq)",
        "adhocq(failq, manager)",
    ])) {
        let p = company_program();
        let t = company_term(seed, 6);
        let once = run(&p, &format!("once_cl({q})"), &t, Monoid::List);
        let Some(Value::List(stop)) = run(&p, &format!("stop_cl({q})"), &t, Monoid::List) else { panic!() };
        prop_assert_eq!(once, stop.first().cloned());
    }
}
