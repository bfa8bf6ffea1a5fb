use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use strata::error::Diagnostic;
use strata::fallibility::{sf_analyse, sf_typing, Sf};
use strata::fixtures;
use strata::interp::{evaluate, Outcome};
use strata::laws::{check_laws, GenConfig};
use strata::program::{LoadError, Program};
use strata::query::{check_kinds, run_query, Monoid};
use strata::reach::{dead_case_report, reach_analyse, OVER_REPORT_NOTE};
use strata::strategy::Strategy;
use strata::syntax::parse_term;
use strata::term::Term;
use strata::termination::{rule_effects, show_relvec, term_analyse_with, verify_annotations, Component, Measure, Rel};

pub const OK: u8 = 0;
pub const FINDINGS: u8 = 1;
pub const USAGE: u8 = 2;
pub const FAILURE: u8 = 3;
pub const DIVERGENT: u8 = 4;

type Result<T> = std::result::Result<T, String>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("error: cannot read {}: {e}", path.display()))
}

fn load(sig: &Path, program: &Path) -> Result<Program> {
    let sig_text = read(sig)?;
    let signature = strata::signature::Signature::parse(&sig_text).map_err(|e| format!("{}:{e}", sig.display()))?;
    let prog = Program::load(signature, &read(program)?).map_err(|e| render_load_error(program, e))?;
    for w in &prog.warnings {
        eprintln!("{}: {w}", program.display());
    }
    Ok(prog)
}

fn render_load_error(path: &Path, e: LoadError) -> String {
    match e {
        LoadError::Parse(p) => format!("{}:{p}", path.display()),
        LoadError::Invalid(ds) => ds.iter().map(|d| format!("{}: {d}", path.display())).collect::<Vec<_>>().join("\n"),
    }
}

fn load_term(prog: &Program, path: &Path) -> Result<Term> {
    let t = parse_term(&read(path)?, Some(&prog.sig)).map_err(|e| format!("{}:{e}", path.display()))?;
    prog.sig.validate_term(&t).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(t)
}

fn main_of(prog: &Program) -> Result<&Strategy> {
    prog.main.as_ref().ok_or_else(|| "error: the program has no `main`".to_string())
}

pub fn run(sig: &Path, program: &Path, term: &Path, fuel: u64, entry: Option<&str>, expr: Option<&str>) -> Result<u8> {
    let prog = load(sig, program)?;
    let s = match (entry, expr) {
        (_, Some(text)) => prog.strategy(text).map_err(|e| render_load_error(Path::new("--expr"), e))?,
        (Some(name), None) => match prog.def(name) {
            Some(d) if d.params.is_empty() => d.body.clone(),
            Some(_) => return Err(format!("error: `{name}` takes parameters; use --expr to apply it")),
            None => return Err(format!("error: no definition named `{name}`")),
        },
        (None, None) => main_of(&prog)?.clone(),
    };
    let t = load_term(&prog, term)?;
    match evaluate(&prog.sig, &prog.rules, &s, &t, fuel).map_err(|e| format!("error: {e}"))? {
        Outcome::Success(u) => {
            println!("{u}");
            Ok(OK)
        }
        Outcome::Failure => {
            println!("FAILURE");
            Ok(FAILURE)
        }
        Outcome::FuelExhausted { steps } => {
            println!("DIVERGENT: fuel exhausted after {steps} steps");
            Ok(DIVERGENT)
        }
    }
}

pub fn query(sig: &Path, program: &Path, term: &Path, monoid: &str, expr: Option<&str>) -> Result<u8> {
    let m = Monoid::from_name(monoid).ok_or_else(|| {
        let names: Vec<&str> = Monoid::ALL.iter().map(|m| m.name()).collect();
        format!("error: unknown monoid `{monoid}`; expected one of {}", names.join(", "))
    })?;
    let prog = load(sig, program)?;
    let q = match expr {
        Some(text) => prog.query_expr(text).map_err(|e| render_load_error(Path::new("--expr"), e))?,
        None => prog.query.clone().ok_or("error: the program has no `query`")?,
    };
    check_kinds(&q, &prog.qrules, &prog.sig, m).map_err(|e| format!("error: {e}"))?;
    let t = load_term(&prog, term)?;
    match run_query(&prog.sig, &prog.qrules, &q, &t, m).map_err(|e| format!("error: {e}"))? {
        Some(v) => println!("{v}"),
        None => println!("NO RESULT"),
    }
    Ok(OK)
}

fn header(name: &str, params: &[String], args: &[String]) -> String {
    if params.is_empty() {
        name.to_string()
    } else {
        let bound: Vec<String> = params.iter().zip(args).map(|(p, a)| format!("{p}={a}")).collect();
        format!("{name}({})", bound.join(", "))
    }
}

/// Every assignment of `values` to `n` parameters, first parameter slowest.
fn assignments<T: Copy>(values: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|pre| {
                values.iter().map(move |v| {
                    let mut x = pre.clone();
                    x.push(*v);
                    x
                })
            })
            .collect();
    }
    out
}

fn show_type(t: Option<bool>) -> &'static str {
    match t {
        Some(true) => "True",
        Some(false) => "False",
        None => "untypable",
    }
}

/// Dead-choice paths of one entry, over every Boolean assumption for its parameters.
fn dead_choices(prog: &Program, s: &Strategy, params: &[String], assume: &[bool]) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for args in assignments(assume, params.len()) {
        let ctx: BTreeMap<String, bool> = params.iter().cloned().zip(args).collect();
        let t = sf_typing(s, &ctx, true, &prog.rules).map_err(|e| format!("error: {e}"))?;
        out.extend(t.dead_choices);
    }
    Ok(out)
}

fn dead_choice_line(name: &str, path: &str) -> String {
    format!("{name}: dead choice at {path}: the left operand never fails, so the right one never runs")
}

pub fn fallibility(sig: &Path, program: &Path, strict: bool) -> Result<u8> {
    let prog = load(sig, program)?;
    let mut findings = 0;
    for (name, s, params) in prog.entries() {
        for args in assignments(&[Sf::ForallSuccess, Sf::ExistsFailure, Sf::Any], params.len()) {
            let env: BTreeMap<String, Sf> = params.iter().cloned().zip(args.iter().copied()).collect();
            let a = sf_analyse(s, &env, &prog.rules).map_err(|e| format!("error: {name}: {e}"))?;
            let shown: Vec<String> = args.iter().map(|x| x.to_string()).collect();
            println!("{}: analysis {a}", header(&name, params, &shown));
        }
        for args in assignments(&[true, false], params.len()) {
            let ctx: BTreeMap<String, bool> = params.iter().cloned().zip(args.iter().copied()).collect();
            let t = sf_typing(s, &ctx, strict, &prog.rules).map_err(|e| format!("error: {name}: {e}"))?;
            let shown: Vec<String> = args.iter().map(|x| show_type(Some(*x)).to_string()).collect();
            println!("{}: type {}", header(&name, params, &shown), show_type(t.ty));
        }
        if strict {
            for p in dead_choices(&prog, s, params, &[true, false])? {
                println!("{}", dead_choice_line(&name, &p));
                findings += 1;
            }
        }
    }
    Ok(if findings > 0 { FINDINGS } else { OK })
}

pub fn reach(sig: &Path, program: &Path, root: &str) -> Result<u8> {
    let prog = load(sig, program)?;
    if !prog.sig.has_sort(root) {
        return Err(format!("error: unknown sort `{root}`"));
    }
    let main = main_of(&prog)?;
    let m = reach_analyse(&prog.sig, &prog.rules, main, &BTreeMap::new()).map_err(|e| format!("error: {e}"))?;
    let reached: Vec<&str> = m.get(root).into_iter().flatten().map(String::as_str).collect();
    println!("root {root} reaches: {{{}}}", reached.join(", "));
    let dead = dead_case_report(&prog.sig, &prog.rules, main, root).map_err(|e| format!("error: {e}"))?;
    for d in &dead {
        println!("{d}");
    }
    if dead.is_empty() {
        Ok(OK)
    } else {
        println!("{OVER_REPORT_NOTE}");
        Ok(FINDINGS)
    }
}

fn parse_measure(prog: &Program, text: &str) -> Result<Measure> {
    let m = Measure::parse(text).map_err(|e| format!("error: bad measure `{text}`: {e}"))?;
    for c in m.components() {
        if let Component::Count(k) = c {
            if prog.sig.symbol(k).is_none() {
                return Err(format!("error: bad measure `{text}`: unknown constructor `{k}`"));
            }
        }
    }
    Ok(m)
}

/// One line per entry; parameters are tried with uniform effects. Returns the lines
/// and the names of closed entries that were not proven.
fn termination_report(prog: &Program, m: &Measure) -> Result<(Vec<String>, Vec<String>)> {
    let effects = rule_effects(&prog.rules, m).map_err(|e| format!("error: {e}"))?;
    let start = vec![Rel::Leq; m.len()];
    let (mut lines, mut unproven) = (Vec::new(), Vec::new());
    for (name, s, params) in prog.entries() {
        for args in assignments(&Rel::ALL, params.len()) {
            let env: BTreeMap<String, Vec<Rel>> =
                params.iter().cloned().zip(args.iter().map(|r| vec![*r; m.len()])).collect();
            let shown: Vec<String> = args.iter().map(|r| show_relvec(&vec![*r; m.len()])).collect();
            let verdict = match term_analyse_with(s, m, &start, &env, &effects).map_err(|e| format!("error: {e}"))? {
                Some(e) => format!("proven, effect {}", show_relvec(&e)),
                None => {
                    if params.is_empty() {
                        unproven.push(name.clone());
                    }
                    "NOT PROVEN".to_string()
                }
            };
            lines.push(format!("{}: {verdict}", header(&name, params, &shown)));
        }
    }
    Ok((lines, unproven))
}

pub fn termination(sig: &Path, program: &Path, measure: &str) -> Result<u8> {
    let prog = load(sig, program)?;
    let m = parse_measure(&prog, measure)?;
    println!("measure: {m}");
    let effects = rule_effects(&prog.rules, &m).map_err(|e| format!("error: {e}"))?;
    for (name, e) in &effects {
        let how = if prog.rules.get(name).is_some_and(|r| r.measure.is_some()) { "claimed" } else { "checked" };
        println!("rule {name}: {} ({how})", show_relvec(e));
    }
    let bad = verify_annotations(&prog.rules, &m);
    for d in &bad {
        println!("{d}");
    }
    let (lines, unproven) = termination_report(&prog, &m)?;
    for l in lines {
        println!("{l}");
    }
    Ok(if unproven.is_empty() && bad.is_empty() { OK } else { FINDINGS })
}

pub fn laws(seed: u64, cases: usize) -> Result<u8> {
    let prog = fixtures::laws_program();
    let cfg = GenConfig { seed, cases, ..GenConfig::default() };
    let report = check_laws(&prog, &cfg).map_err(|e| format!("error: {e}"))?;
    print!("{report}");
    Ok(if report.all_passed() { OK } else { FINDINGS })
}

pub fn lint(sig: &Path, program: &Path, root: Option<&str>, measure: &str) -> Result<u8> {
    let prog = load(sig, program)?;
    let m = parse_measure(&prog, measure)?;
    let mut findings: Vec<String> = prog.warnings.iter().map(Diagnostic::to_string).collect();
    for (name, s, params) in prog.entries() {
        // Parameters are assumed fallible: a choice flagged then is dead for any argument.
        for p in dead_choices(&prog, s, params, &[false])? {
            findings.push(dead_choice_line(&name, &p));
        }
    }
    if let Some(root) = root {
        let main = main_of(&prog)?;
        for d in dead_case_report(&prog.sig, &prog.rules, main, root).map_err(|e| format!("error: {e}"))? {
            findings.push(d.to_string());
        }
    }
    findings.extend(verify_annotations(&prog.rules, &m).iter().map(Diagnostic::to_string));
    let (_, unproven) = termination_report(&prog, &m)?;
    for name in unproven {
        findings.push(format!("{name}: termination NOT PROVEN under measure {m}"));
    }
    for f in &findings {
        println!("{f}");
    }
    if findings.is_empty() {
        println!("no findings");
        Ok(OK)
    } else {
        println!("{} finding(s)", findings.len());
        Ok(FINDINGS)
    }
}
