//! Randomised checking of the algebraic laws of the strategy primitives, bounded
//! search for counterexamples to the non-laws, and fallibility properties of the
//! traversal schemes.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fallibility::sf_type_of;
use crate::interp::{evaluate, EvalError, Outcome};
use crate::program::Program;
use crate::signature::Signature;
use crate::strategy::{self as st, Scheme, Strategy};
use crate::term::{Literal, PrimKind, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub max_depth: usize,
    pub max_size: usize,
    pub fuel: u64,
    pub cases: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 0, max_depth: 5, max_size: 6, fuel: 10_000, cases: 1000 }
    }
}

/// Seeded generator of terms and strategies.
pub struct Gen<'a> {
    sig: &'a Signature,
    rules: Vec<String>,
    min_depths: BTreeMap<String, usize>,
    rng: ChaCha8Rng,
}

impl<'a> Gen<'a> {
    pub fn new(prog: &'a Program, seed: u64) -> Gen<'a> {
        Gen {
            sig: &prog.sig,
            rules: prog.rules.names().map(str::to_string).collect(),
            min_depths: prog.sig.min_depths(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn literal(&mut self, kind: PrimKind) -> Literal {
        match kind {
            PrimKind::Int => Literal::Int(self.rng.gen_range(0..10)),
            PrimKind::Float => Literal::Float(self.rng.gen_range(0..10) as f64),
            PrimKind::Str => Literal::Str(["a", "b", "c"].choose(&mut self.rng).copied().unwrap_or("a").into()),
        }
    }

    /// A term of `sort` no deeper than `depth`, or `None` if the sort has no such term.
    pub fn term_of(&mut self, sort: &str, depth: usize) -> Option<Term> {
        if let Some(kind) = self.sig.prim_kind(sort) {
            return (depth >= 1).then(|| Term::lit(self.literal(kind), sort));
        }
        let fits = |s: &str| self.min_depths.get(s).is_some_and(|d| *d < depth);
        let mut options: Vec<_> = self
            .sig
            .symbols_of_sort(sort)
            .filter(|sym| sym.arg_sorts.iter().all(|a| fits(a)))
            .cloned()
            .collect();
        if options.is_empty() {
            return None;
        }
        // Lean towards constants so that terms stay small.
        let constants: Vec<_> = options.iter().filter(|s| s.arg_sorts.is_empty()).cloned().collect();
        if !constants.is_empty() && self.rng.gen_bool(0.3) {
            options = constants;
        }
        let sym = options.choose(&mut self.rng)?.clone();
        let mut kids = Vec::with_capacity(sym.arg_sorts.len());
        for a in &sym.arg_sorts {
            kids.push(self.term_of(a, depth - 1)?);
        }
        Some(Term::node(sym.constr.as_str(), kids))
    }

    /// A term of a random non-primitive sort.
    pub fn term(&mut self, depth: usize) -> Term {
        let sorts: Vec<String> = self
            .sig
            .sorts()
            .iter()
            .filter(|s| !self.sig.is_prim(s) && self.min_depths.get(*s).is_some_and(|d| *d <= depth))
            .cloned()
            .collect();
        loop {
            let sort = sorts.choose(&mut self.rng).expect("an inhabited sort within the depth bound").clone();
            if let Some(t) = self.term_of(&sort, depth) {
                return t;
            }
        }
    }

    pub fn constant_term(&mut self) -> Term {
        self.term(1)
    }

    pub fn non_constant_term(&mut self, depth: usize) -> Term {
        loop {
            let t = self.term(depth.max(2));
            if !t.is_constant() {
                return t;
            }
        }
    }

    fn atom(&mut self) -> Strategy {
        let roll: f64 = self.rng.gen();
        if roll < 0.25 || self.rules.is_empty() {
            Strategy::Id
        } else if roll < 0.4 {
            Strategy::Fail
        } else {
            st::rule(self.rules.choose(&mut self.rng).unwrap().clone())
        }
    }

    /// A closed strategy with at most `size` nodes counted as in the surface syntax.
    /// With `schemes`, traversal schemes may appear; each costs one node.
    pub fn strategy(&mut self, size: usize, schemes: bool) -> Strategy {
        if size <= 1 {
            return self.atom();
        }
        let choices = if schemes { 6 } else { 5 };
        match self.rng.gen_range(0..choices) {
            0 | 1 => {
                let left = self.rng.gen_range(1..size);
                let a = self.strategy(left, schemes);
                let b = self.strategy(size - left, schemes);
                if self.rng.gen_bool(0.5) {
                    st::seq(a, b)
                } else {
                    st::choice(a, b)
                }
            }
            2 => st::all(self.strategy(size - 1, schemes)),
            3 => st::one(self.strategy(size - 1, schemes)),
            4 => match self.rules.choose(&mut self.rng).cloned() {
                Some(r) => st::adhoc(self.strategy(size - 1, schemes), r),
                None => self.atom(),
            },
            _ => {
                let scheme = *Scheme::ALL.choose(&mut self.rng).unwrap();
                scheme.apply(self.strategy(size - 1, schemes))
            }
        }
    }
}

/// Which terms a law quantifies over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermClass {
    Any,
    Constant,
    NonConstant,
}

/// An equation schema. `sides` instantiates each equality of the law.
#[derive(Clone)]
pub struct Law {
    pub name: &'static str,
    pub arity: usize,
    pub class: TermClass,
    pub sides: fn(&[Strategy]) -> Vec<(Strategy, Strategy)>,
}

impl fmt::Debug for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Law").field("name", &self.name).field("arity", &self.arity).finish()
    }
}

fn c(s: &Strategy) -> Strategy {
    s.clone()
}

pub fn laws() -> Vec<Law> {
    use Strategy::{Fail, Id};
    use TermClass::*;
    vec![
        Law { name: "unit of ;", arity: 1, class: Any, sides: |s| {
            vec![(st::seq(Id, c(&s[0])), c(&s[0])), (st::seq(c(&s[0]), Id), c(&s[0]))]
        } },
        Law { name: "zero of ;", arity: 1, class: Any, sides: |s| {
            vec![(st::seq(Fail, c(&s[0])), Fail), (st::seq(c(&s[0]), Fail), Fail)]
        } },
        Law { name: "unit of <+", arity: 1, class: Any, sides: |s| {
            vec![(st::choice(Fail, c(&s[0])), c(&s[0])), (st::choice(c(&s[0]), Fail), c(&s[0]))]
        } },
        Law { name: "left zero of <+", arity: 1, class: Any, sides: |s| vec![(st::choice(Id, c(&s[0])), Id)] },
        Law { name: "associativity of ;", arity: 3, class: Any, sides: |s| {
            vec![(
                st::seq(c(&s[0]), st::seq(c(&s[1]), c(&s[2]))),
                st::seq(st::seq(c(&s[0]), c(&s[1])), c(&s[2])),
            )]
        } },
        Law { name: "associativity of <+", arity: 3, class: Any, sides: |s| {
            vec![(
                st::choice(c(&s[0]), st::choice(c(&s[1]), c(&s[2]))),
                st::choice(st::choice(c(&s[0]), c(&s[1])), c(&s[2])),
            )]
        } },
        Law { name: "left distributivity", arity: 3, class: Any, sides: |s| {
            vec![(
                st::seq(c(&s[0]), st::choice(c(&s[1]), c(&s[2]))),
                st::choice(st::seq(c(&s[0]), c(&s[1])), st::seq(c(&s[0]), c(&s[2]))),
            )]
        } },
        Law { name: "one-layer identity", arity: 0, class: Any, sides: |_| vec![(st::all(Id), Id)] },
        Law { name: "one-layer failure", arity: 0, class: Any, sides: |_| vec![(st::one(Fail), Fail)] },
        Law { name: "fusion law", arity: 2, class: Any, sides: |s| {
            vec![(st::seq(st::all(c(&s[0])), st::all(c(&s[1]))), st::all(st::seq(c(&s[0]), c(&s[1]))))]
        } },
        Law { name: "all with a constant", arity: 1, class: Constant, sides: |s| vec![(st::all(c(&s[0])), Id)] },
        Law { name: "one with a constant", arity: 1, class: Constant, sides: |s| vec![(st::one(c(&s[0])), Fail)] },
        Law { name: "all with a non-constant", arity: 0, class: NonConstant, sides: |_| vec![(st::all(Fail), Fail)] },
        Law { name: "one with a non-constant", arity: 0, class: NonConstant, sides: |_| vec![(st::one(Id), Id)] },
    ]
}

/// Putative equalities that do not hold; each must be refuted by a concrete witness.
pub fn non_laws() -> Vec<Law> {
    use TermClass::*;
    vec![
        Law { name: "commutativity of ;", arity: 2, class: Any, sides: |s| {
            vec![(st::seq(c(&s[0]), c(&s[1])), st::seq(c(&s[1]), c(&s[0])))]
        } },
        Law { name: "commutativity of <+", arity: 2, class: Any, sides: |s| {
            vec![(st::choice(c(&s[0]), c(&s[1])), st::choice(c(&s[1]), c(&s[0])))]
        } },
        Law { name: "right distributivity", arity: 3, class: Any, sides: |s| {
            vec![(
                st::seq(st::choice(c(&s[0]), c(&s[1])), c(&s[2])),
                st::choice(st::seq(c(&s[0]), c(&s[2])), st::seq(c(&s[1]), c(&s[2]))),
            )]
        } },
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub strategies: Vec<Strategy>,
    pub term: Term,
    pub lhs: Strategy,
    pub rhs: Strategy,
    pub lhs_out: Outcome,
    pub rhs_out: Outcome,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.strategies.iter().enumerate() {
            write!(f, "s{} = {s}, ", i + 1)?;
        }
        write!(f, "t = {}: {} gives {} but {} gives {}", self.term, self.lhs, self.lhs_out, self.rhs, self.rhs_out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    Law,
    NonLaw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LawResult {
    pub name: String,
    pub kind: LawKind,
    pub cases: usize,
    pub discarded: usize,
    pub counterexample: Option<Counterexample>,
}

impl LawResult {
    /// Laws pass with no counterexample and fewer than 10% discarded cases; non-laws
    /// pass when refuted.
    pub fn passed(&self) -> bool {
        match self.kind {
            LawKind::Law => self.counterexample.is_none() && self.discarded * 10 < self.cases.max(1),
            LawKind::NonLaw => self.counterexample.is_some(),
        }
    }
}

impl fmt::Display for LawResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        match self.kind {
            LawKind::Law => {
                write!(f, "LAW {} {verdict} cases={} discarded={}", self.name, self.cases, self.discarded)?;
            }
            LawKind::NonLaw => write!(f, "LAW not {} {verdict}", self.name)?,
        }
        match &self.counterexample {
            Some(cx) => write!(f, " counterexample: {cx}"),
            None if self.kind == LawKind::NonLaw => write!(f, " no counterexample within bounds"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LawReport {
    pub results: Vec<LawResult>,
}

impl LawReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(LawResult::passed)
    }
}

impl fmt::Display for LawReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

enum Verdict {
    Agree,
    Discard,
    Differ(Counterexample),
}

fn compare(prog: &Program, law: &Law, ss: &[Strategy], t: &Term, fuel: u64) -> Result<Verdict, EvalError> {
    let mut discard = false;
    for (lhs, rhs) in (law.sides)(ss) {
        let a = evaluate(&prog.sig, &prog.rules, &lhs, t, fuel)?;
        let b = evaluate(&prog.sig, &prog.rules, &rhs, t, fuel)?;
        match (&a, &b) {
            (Outcome::FuelExhausted { .. }, _) | (_, Outcome::FuelExhausted { .. }) => discard = true,
            _ if a != b => {
                return Ok(Verdict::Differ(Counterexample {
                    strategies: ss.to_vec(),
                    term: t.clone(),
                    lhs,
                    rhs,
                    lhs_out: a,
                    rhs_out: b,
                }))
            }
            _ => {}
        }
    }
    Ok(if discard { Verdict::Discard } else { Verdict::Agree })
}

fn sub_seed(seed: u64, salt: &str) -> u64 {
    // FNV-1a over the salt, mixed with the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in salt.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn gen_term_for(g: &mut Gen<'_>, class: TermClass, depth: usize) -> Term {
    match class {
        TermClass::Any => g.term(depth),
        TermClass::Constant => g.constant_term(),
        TermClass::NonConstant => g.non_constant_term(depth),
    }
}

/// Samples `cfg.cases` instances of `law` and shrinks the first violation.
pub fn check_law(prog: &Program, law: &Law, cfg: &GenConfig) -> Result<LawResult, EvalError> {
    let mut g = Gen::new(prog, sub_seed(cfg.seed, law.name));
    let mut discarded = 0;
    for _ in 0..cfg.cases {
        let ss: Vec<Strategy> = (0..law.arity)
            .map(|_| {
                let size = g.rng().gen_range(1..=cfg.max_size);
                g.strategy(size, true)
            })
            .collect();
        let t = gen_term_for(&mut g, law.class, cfg.max_depth);
        match compare(prog, law, &ss, &t, cfg.fuel)? {
            Verdict::Agree => {}
            Verdict::Discard => discarded += 1,
            Verdict::Differ(cx) => {
                let cx = shrink(prog, law, cx, cfg.fuel)?;
                return Ok(LawResult {
                    name: law.name.to_string(),
                    kind: LawKind::Law,
                    cases: cfg.cases,
                    discarded,
                    counterexample: Some(cx),
                });
            }
        }
    }
    Ok(LawResult { name: law.name.to_string(), kind: LawKind::Law, cases: cfg.cases, discarded, counterexample: None })
}

fn strategy_candidates(s: &Strategy) -> Vec<Strategy> {
    let mut out = vec![Strategy::Id, Strategy::Fail];
    out.extend(s.children().into_iter().filter(|c| c.is_closed()).cloned());
    // One level of simplification inside the node.
    match s {
        Strategy::Seq(a, b) | Strategy::Choice(a, b) => {
            let mk = |x: Strategy, y: Strategy| match s {
                Strategy::Seq(..) => st::seq(x, y),
                _ => st::choice(x, y),
            };
            for x in strategy_candidates(a) {
                out.push(mk(x, (**b).clone()));
            }
            for y in strategy_candidates(b) {
                out.push(mk((**a).clone(), y));
            }
        }
        Strategy::All(a) => out.extend(strategy_candidates(a).into_iter().map(st::all)),
        Strategy::One(a) => out.extend(strategy_candidates(a).into_iter().map(st::one)),
        Strategy::Adhoc(a, r) => out.extend(strategy_candidates(a).into_iter().map(|x| st::adhoc(x, r.clone()))),
        _ => {}
    }
    out.retain(|c| c.size() < s.size());
    out
}

fn term_candidates(sig: &Signature, t: &Term) -> Vec<Term> {
    let sort = sig.sort_of(t).ok();
    let mut out: Vec<Term> = Vec::new();
    if let Some(sort) = sort {
        out.extend(t.children().iter().filter(|c| sig.sort_of(c).ok() == Some(sort)).cloned());
        out.extend(
            sig.symbols_of_sort(sort).filter(|s| s.arg_sorts.is_empty()).map(|s| Term::constant(s.constr.as_str())),
        );
    }
    // Shrink one child at a time.
    for (i, k) in t.children().iter().enumerate() {
        for k2 in term_candidates(sig, k) {
            let mut kids = t.children().to_vec();
            kids[i] = k2;
            out.push(t.with_children(kids));
        }
    }
    out.retain(|c| c.size() < t.size());
    out
}

/// Greedy shrinking: replace strategies by subexpressions and the term by smaller
/// terms of the same sort for as long as the instance remains a counterexample.
pub fn shrink(prog: &Program, law: &Law, mut cx: Counterexample, fuel: u64) -> Result<Counterexample, EvalError> {
    loop {
        let mut improved = false;
        for i in 0..cx.strategies.len() {
            for cand in strategy_candidates(&cx.strategies[i]) {
                let mut ss = cx.strategies.clone();
                ss[i] = cand;
                if let Verdict::Differ(next) = compare(prog, law, &ss, &cx.term, fuel)? {
                    cx = next;
                    improved = true;
                    break;
                }
            }
        }
        for cand in term_candidates(&prog.sig, &cx.term) {
            if let Verdict::Differ(next) = compare(prog, law, &cx.strategies, &cand, fuel)? {
                cx = next;
                improved = true;
                break;
            }
        }
        if !improved {
            return Ok(cx);
        }
    }
}

/// All closed strategies without schemes, by exact size, up to `max_size`.
pub fn enumerate_strategies(prog: &Program, max_size: usize) -> Vec<Vec<Strategy>> {
    let rules: Vec<String> = prog.rules.names().map(str::to_string).collect();
    let mut by_size: Vec<Vec<Strategy>> = vec![Vec::new(); max_size + 1];
    if max_size == 0 {
        return by_size;
    }
    by_size[1] = [Strategy::Id, Strategy::Fail].into_iter().chain(rules.iter().map(|r| st::rule(r.clone()))).collect();
    for n in 2..=max_size {
        let mut out = Vec::new();
        for s in &by_size[n - 1] {
            out.push(st::all(s.clone()));
            out.push(st::one(s.clone()));
            for r in &rules {
                out.push(st::adhoc(s.clone(), r.clone()));
            }
        }
        for left in 1..n - 1 {
            let right = n - 1 - left;
            for a in &by_size[left] {
                for b in &by_size[right] {
                    out.push(st::seq(a.clone(), b.clone()));
                    out.push(st::choice(a.clone(), b.clone()));
                }
            }
        }
        by_size[n] = out;
    }
    by_size
}

/// All terms of depth at most `depth`, at most `cap` per sort. Primitive sorts are
/// sampled with the literals 0 and 1, or "a".
pub fn enumerate_terms(sig: &Signature, depth: usize, cap: usize) -> Vec<Term> {
    let mut level: BTreeMap<String, Vec<Term>> = BTreeMap::new();
    for d in 1..=depth {
        let mut next: BTreeMap<String, Vec<Term>> = BTreeMap::new();
        for (sort, kind) in sig.prim_sorts() {
            let lits = match kind {
                PrimKind::Int => vec![Literal::Int(0), Literal::Int(1)],
                PrimKind::Float => vec![Literal::Float(0.0), Literal::Float(1.0)],
                PrimKind::Str => vec![Literal::Str("a".into())],
            };
            next.insert(sort.clone(), lits.into_iter().map(|l| Term::lit(l, sort.as_str())).collect());
        }
        for sym in sig.symbols() {
            let bucket = next.entry(sym.result_sort.clone()).or_default();
            if d == 1 && !sym.arg_sorts.is_empty() {
                continue;
            }
            let mut partial: Vec<Vec<Term>> = vec![Vec::new()];
            for a in &sym.arg_sorts {
                let opts = level.get(a).cloned().unwrap_or_default();
                let mut grown = Vec::new();
                for p in &partial {
                    for o in &opts {
                        if grown.len() >= cap {
                            break;
                        }
                        let mut q = p.clone();
                        q.push(o.clone());
                        grown.push(q);
                    }
                }
                partial = grown;
            }
            for kids in partial {
                if bucket.len() >= cap {
                    break;
                }
                bucket.push(Term::node(sym.constr.as_str(), kids));
            }
        }
        level = next;
    }
    let mut out: Vec<Term> =
        level.into_iter().filter(|(s, _)| !sig.is_prim(s)).flat_map(|(_, ts)| ts).collect();
    out.sort_by_key(Term::size);
    out
}

/// Searches tuples of strategies of size at most `max_size` in order of total size,
/// over all terms of depth at most `depth`, for a witness against `law`.
pub fn search_counterexample(
    prog: &Program,
    law: &Law,
    max_size: usize,
    depth: usize,
    fuel: u64,
) -> Result<Option<Counterexample>, EvalError> {
    let pool = enumerate_strategies(prog, max_size);
    let terms = enumerate_terms(&prog.sig, depth, 16);
    let terms: Vec<Term> = terms
        .into_iter()
        .filter(|t| match law.class {
            TermClass::Any => true,
            TermClass::Constant => t.is_constant(),
            TermClass::NonConstant => !t.is_constant(),
        })
        .collect();
    for total in law.arity..=law.arity * max_size {
        let mut found = None;
        let mut sizes = Vec::new();
        tuples(&pool, law.arity, total, &mut sizes, &mut |ss| {
            for t in &terms {
                match compare(prog, law, ss, t, fuel) {
                    Ok(Verdict::Differ(cx)) => {
                        found = Some(Ok(cx));
                        return true;
                    }
                    Err(e) => {
                        found = Some(Err(e));
                        return true;
                    }
                    _ => {}
                }
            }
            false
        });
        if let Some(r) = found {
            return r.map(Some);
        }
    }
    Ok(None)
}

/// Calls `f` on every tuple of `arity` strategies whose sizes sum to `total`, stopping
/// early when `f` returns true.
fn tuples(
    pool: &[Vec<Strategy>],
    arity: usize,
    total: usize,
    prefix: &mut Vec<Strategy>,
    f: &mut impl FnMut(&[Strategy]) -> bool,
) -> bool {
    if prefix.len() == arity {
        return total == 0 && f(prefix);
    }
    let rest = arity - prefix.len() - 1;
    for size in 1..pool.len() {
        if size > total || total - size < rest {
            break;
        }
        for s in &pool[size] {
            prefix.push(s.clone());
            let stop = tuples(pool, arity, total - size, prefix, f);
            prefix.pop();
            if stop {
                return true;
            }
        }
    }
    false
}

/// Bounds for the non-law search.
pub const SEARCH_MAX_SIZE: usize = 4;
pub const SEARCH_MAX_DEPTH: usize = 3;

pub fn check_non_law(prog: &Program, law: &Law, cfg: &GenConfig) -> Result<LawResult, EvalError> {
    let cx = search_counterexample(prog, law, SEARCH_MAX_SIZE, SEARCH_MAX_DEPTH, cfg.fuel)?;
    Ok(LawResult { name: law.name.to_string(), kind: LawKind::NonLaw, cases: 0, discarded: 0, counterexample: cx })
}

/// Every law and non-law, in the order of [`laws`] then [`non_laws`].
pub fn check_laws(prog: &Program, cfg: &GenConfig) -> Result<LawReport, EvalError> {
    let mut results = Vec::new();
    for law in laws() {
        results.push(check_law(prog, &law, cfg)?);
    }
    for law in non_laws() {
        results.push(check_non_law(prog, &law, cfg)?);
    }
    Ok(LawReport { results })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub runs: usize,
    pub discarded: usize,
    pub failures: usize,
    pub witness: Option<String>,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PROPERTY {} {} runs={} discarded={} failures={}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.runs,
            self.discarded,
            self.failures
        )?;
        if let Some(w) = &self.witness {
            write!(f, " witness: {w}")?;
        }
        Ok(())
    }
}

enum Expect {
    /// No run may fail.
    NeverFails,
    /// Some run must fail.
    SomeFailure,
    /// Every run returns its input.
    Identity,
}

fn check_property(
    prog: &Program,
    cfg: &GenConfig,
    name: &'static str,
    build: fn(Strategy) -> Strategy,
    expect: Expect,
) -> Result<PropertyResult, EvalError> {
    let mut g = Gen::new(prog, sub_seed(cfg.seed, name));
    let (mut discarded, mut failures, mut wrong) = (0, 0, 0);
    let mut witness = None;
    let mut runs = 0;
    for _ in 0..cfg.cases {
        let size = g.rng().gen_range(1..=cfg.max_size);
        let s = build(g.strategy(size, false));
        let t = g.term(cfg.max_depth);
        runs += 1;
        let out = evaluate(&prog.sig, &prog.rules, &s, &t, cfg.fuel)?;
        match &out {
            Outcome::FuelExhausted { .. } => discarded += 1,
            Outcome::Failure => {
                failures += 1;
                if witness.is_none() {
                    witness = Some(format!("{s} on {t}"));
                }
                if matches!(expect, Expect::SomeFailure) {
                    break;
                }
            }
            Outcome::Success(u) => {
                if matches!(expect, Expect::Identity) && u != &t {
                    wrong += 1;
                    if witness.is_none() {
                        witness = Some(format!("{s} on {t} gives {u}"));
                    }
                }
            }
        }
    }
    let passed = match expect {
        Expect::NeverFails => failures == 0,
        Expect::SomeFailure => failures > 0,
        Expect::Identity => failures == 0 && wrong == 0 && discarded == 0,
    };
    let witness = if passed && !matches!(expect, Expect::SomeFailure) { None } else { witness };
    Ok(PropertyResult { name, passed, runs, discarded, failures: failures + wrong, witness })
}

/// Success and failure behaviour of the traversal schemes on random arguments.
pub fn check_scheme_properties(prog: &Program, cfg: &GenConfig) -> Result<Vec<PropertyResult>, EvalError> {
    Ok(vec![
        check_property(prog, cfg, "stop_td is infallible", st::stop_td, Expect::NeverFails)?,
        check_property(prog, cfg, "innermost is infallible", st::innermost, Expect::NeverFails)?,
        check_property(prog, cfg, "once_td is fallible", st::once_td, Expect::SomeFailure)?,
        check_property(prog, cfg, "once_bu is fallible", st::once_bu, Expect::SomeFailure)?,
        check_property(prog, cfg, "full_td of an infallible argument is infallible", |s| st::full_td(st::try_(s)), Expect::NeverFails)?,
        check_property(prog, cfg, "full_bu of an infallible argument is infallible", |s| st::full_bu(st::try_(s)), Expect::NeverFails)?,
        check_property(prog, cfg, "stop_bu is a deep identity", st::stop_bu, Expect::Identity)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundnessReport {
    /// Strategies generated in total, typed or not.
    pub generated: usize,
    /// Runs of strategies typed as infallible.
    pub runs: usize,
    pub discarded: usize,
    pub failures: Vec<String>,
}

impl fmt::Display for SoundnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SOUNDNESS {} runs={} generated={} discarded={} failures={}",
            if self.failures.is_empty() { "PASS" } else { "FAIL" },
            self.runs,
            self.generated,
            self.discarded,
            self.failures.len()
        )?;
        if let Some(w) = self.failures.first() {
            write!(f, " witness: {w}")?;
        }
        Ok(())
    }
}

/// Runs strategies that the type system declares infallible on random terms and
/// records every failure. Stops after `runs` typed runs or `runs * 100` attempts.
pub fn check_typing_soundness(prog: &Program, cfg: &GenConfig, runs: usize) -> Result<SoundnessReport, EvalError> {
    let mut g = Gen::new(prog, sub_seed(cfg.seed, "soundness"));
    let ctx = BTreeMap::new();
    let mut rep = SoundnessReport { generated: 0, runs: 0, discarded: 0, failures: Vec::new() };
    while rep.runs < runs && rep.generated < runs.saturating_mul(100) {
        let size = g.rng().gen_range(1..=cfg.max_size);
        let s = g.strategy(size, true);
        rep.generated += 1;
        let typed = sf_type_of(&s, &ctx, false, &prog.rules).expect("generated strategies are closed");
        if typed != Some(true) {
            continue;
        }
        let t = g.term(cfg.max_depth);
        rep.runs += 1;
        match evaluate(&prog.sig, &prog.rules, &s, &t, cfg.fuel)? {
            Outcome::Failure => rep.failures.push(format!("{s} on {t}")),
            Outcome::FuelExhausted { .. } => rep.discarded += 1,
            Outcome::Success(_) => {}
        }
    }
    Ok(rep)
}
