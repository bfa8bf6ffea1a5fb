//! Signatures, programs and terms shared by tests, benchmarks and the CLI.

use crate::program::Program;
use crate::signature::Signature;
use crate::syntax::parse_term;
use crate::term::Term;

pub const NAT_TREE_SIG: &str = include_str!("../fixtures/nat_tree.sig");
pub const COMPANY_SIG: &str = include_str!("../fixtures/company.sig");
pub const INCREMENT_PROGRAM: &str = include_str!("../fixtures/increment.strata");
pub const COMPANY_PROGRAM: &str = include_str!("../fixtures/company.strata");
pub const LAWS_PROGRAM: &str = include_str!("../fixtures/laws.strata");
pub const C0_TERM: &str = include_str!("../fixtures/c0.term");

pub fn nat_tree_signature() -> Signature {
    Signature::parse(NAT_TREE_SIG).expect("bundled signature parses")
}

pub fn company_signature() -> Signature {
    Signature::parse(COMPANY_SIG).expect("bundled signature parses")
}

pub fn increment_program() -> Program {
    Program::load(nat_tree_signature(), INCREMENT_PROGRAM).expect("bundled program loads")
}

pub fn company_program() -> Program {
    Program::load(company_signature(), COMPANY_PROGRAM).expect("bundled program loads")
}

pub fn laws_program() -> Program {
    Program::load(nat_tree_signature(), LAWS_PROGRAM).expect("bundled program loads")
}

/// `Succ^n Zero`.
pub fn nat(n: usize) -> Term {
    let mut t = Term::constant("Zero");
    for _ in 0..n {
        t = Term::node("Succ", vec![t]);
    }
    t
}

/// `Node label []`.
pub fn leaf(label: Term) -> Term {
    Term::node("Node", vec![label, Term::constant("Nil_NatTree")])
}

/// A single-node tree of numbers labelled `Zero`.
pub fn tree1() -> Term {
    leaf(nat(0))
}

/// A single-node tree of Booleans labelled `True`.
pub fn tree2() -> Term {
    Term::node("BNode", vec![Term::constant("True"), Term::constant("Nil_BoolTree")])
}

/// One department with a manager earning 100 and two employees earning 10 and 20.
pub fn c0() -> Term {
    parse_term(C0_TERM, Some(&company_signature())).expect("bundled term parses")
}
