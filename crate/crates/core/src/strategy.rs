//! Strategy expressions and the traversal schemes built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Id,
    Fail,
    Seq(Box<Strategy>, Box<Strategy>),
    Choice(Box<Strategy>, Box<Strategy>),
    All(Box<Strategy>),
    One(Box<Strategy>),
    Var(String),
    Rec(String, Box<Strategy>),
    Rule(String),
    /// Runs the rule on terms of its sort and the default on everything else.
    Adhoc(Box<Strategy>, String),
}

pub fn seq(a: Strategy, b: Strategy) -> Strategy {
    Strategy::Seq(Box::new(a), Box::new(b))
}

pub fn choice(a: Strategy, b: Strategy) -> Strategy {
    Strategy::Choice(Box::new(a), Box::new(b))
}

pub fn all(s: Strategy) -> Strategy {
    Strategy::All(Box::new(s))
}

pub fn one(s: Strategy) -> Strategy {
    Strategy::One(Box::new(s))
}

pub fn var(v: impl Into<String>) -> Strategy {
    Strategy::Var(v.into())
}

pub fn rec(v: impl Into<String>, body: Strategy) -> Strategy {
    Strategy::Rec(v.into(), Box::new(body))
}

pub fn rule(r: impl Into<String>) -> Strategy {
    Strategy::Rule(r.into())
}

pub fn adhoc(default: Strategy, r: impl Into<String>) -> Strategy {
    Strategy::Adhoc(Box::new(default), r.into())
}

impl Strategy {
    /// Number of constructors in the expression.
    pub fn size(&self) -> usize {
        match self {
            Strategy::Id | Strategy::Fail | Strategy::Var(_) | Strategy::Rule(_) => 1,
            Strategy::Seq(a, b) | Strategy::Choice(a, b) => 1 + a.size() + b.size(),
            Strategy::All(s) | Strategy::One(s) | Strategy::Rec(_, s) | Strategy::Adhoc(s, _) => 1 + s.size(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
        match self {
            Strategy::Var(v) => {
                if !bound.contains(&v.as_str()) {
                    out.insert(v.clone());
                }
            }
            Strategy::Rec(v, b) => {
                bound.push(v);
                b.collect_free(bound, out);
                bound.pop();
            }
            Strategy::Seq(a, b) | Strategy::Choice(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Strategy::All(s) | Strategy::One(s) | Strategy::Adhoc(s, _) => s.collect_free(bound, out),
            Strategy::Id | Strategy::Fail | Strategy::Rule(_) => {}
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every identifier in the expression: variables, binders and rule names.
    pub fn names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |s| match s {
            Strategy::Var(v) | Strategy::Rec(v, _) | Strategy::Rule(v) | Strategy::Adhoc(_, v) => {
                out.insert(v.clone());
            }
            _ => {}
        });
        out
    }

    /// Rule names referenced by `Rule` leaves and adhoc cases.
    pub fn rule_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |s| {
            if let Strategy::Rule(r) | Strategy::Adhoc(_, r) = s {
                out.insert(r.clone());
            }
        });
        out
    }

    /// Preorder walk over all subexpressions, including `self`.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Strategy)) {
        f(self);
        match self {
            Strategy::Seq(a, b) | Strategy::Choice(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Strategy::All(s) | Strategy::One(s) | Strategy::Rec(_, s) | Strategy::Adhoc(s, _) => s.visit(f),
            Strategy::Id | Strategy::Fail | Strategy::Var(_) | Strategy::Rule(_) => {}
        }
    }

    /// Immediate subexpressions, left to right.
    pub fn children(&self) -> Vec<&Strategy> {
        match self {
            Strategy::Seq(a, b) | Strategy::Choice(a, b) => vec![a, b],
            Strategy::All(s) | Strategy::One(s) | Strategy::Rec(_, s) | Strategy::Adhoc(s, _) => vec![s],
            Strategy::Id | Strategy::Fail | Strategy::Var(_) | Strategy::Rule(_) => Vec::new(),
        }
    }

    /// Capture-avoiding substitution of `v` by `by`.
    pub fn subst(&self, v: &str, by: &Strategy) -> Strategy {
        let mut m = BTreeMap::new();
        m.insert(v.to_string(), by.clone());
        self.subst_many(&m)
    }

    /// Simultaneous capture-avoiding substitution.
    pub fn subst_many(&self, m: &BTreeMap<String, Strategy>) -> Strategy {
        if m.is_empty() {
            return self.clone();
        }
        match self {
            Strategy::Var(v) => m.get(v).cloned().unwrap_or_else(|| self.clone()),
            Strategy::Id | Strategy::Fail | Strategy::Rule(_) => self.clone(),
            Strategy::Seq(a, b) => seq(a.subst_many(m), b.subst_many(m)),
            Strategy::Choice(a, b) => choice(a.subst_many(m), b.subst_many(m)),
            Strategy::All(s) => all(s.subst_many(m)),
            Strategy::One(s) => one(s.subst_many(m)),
            Strategy::Adhoc(s, r) => adhoc(s.subst_many(m), r.clone()),
            Strategy::Rec(v, b) => {
                let mut inner: BTreeMap<String, Strategy> = m.clone();
                inner.remove(v);
                let body_free = b.free_vars();
                inner.retain(|k, _| body_free.contains(k));
                if inner.is_empty() {
                    return self.clone();
                }
                let captured = inner.values().any(|r| r.free_vars().contains(v));
                if !captured {
                    return rec(v.clone(), b.subst_many(&inner));
                }
                let mut avoid = b.names();
                for r in inner.values() {
                    avoid.extend(r.names());
                }
                avoid.extend(inner.keys().cloned());
                let fresh = fresh_name(&avoid);
                let renamed = b.subst(v, &Strategy::Var(fresh.clone()));
                rec(fresh, renamed.subst_many(&inner))
            }
        }
    }
}

/// First `x{n}` not in `avoid`.
pub fn fresh_name(avoid: &BTreeSet<String>) -> String {
    (0..).map(|n| format!("x{n}")).find(|c| !avoid.contains(c)).expect("unbounded supply")
}

/// Fresh recursion variable for a scheme applied to `s`.
pub fn fresh_var(s: &Strategy) -> String {
    fresh_name(&s.names())
}

pub fn try_(s: Strategy) -> Strategy {
    choice(s, Strategy::Id)
}

pub fn repeat(s: Strategy) -> Strategy {
    let v = fresh_var(&s);
    rec(v.clone(), try_(seq(s, var(v))))
}

pub fn full_td(s: Strategy) -> Strategy {
    let v = fresh_var(&s);
    rec(v.clone(), seq(s, all(var(v))))
}

pub fn full_bu(s: Strategy) -> Strategy {
    let v = fresh_var(&s);
    rec(v.clone(), seq(all(var(v)), s))
}

pub fn once_td(s: Strategy) -> Strategy {
    let v = fresh_var(&s);
    rec(v.clone(), choice(s, one(var(v))))
}

pub fn once_bu(s: Strategy) -> Strategy {
    let v = fresh_var(&s);
    rec(v.clone(), choice(one(var(v)), s))
}

pub fn stop_td(s: Strategy) -> Strategy {
    let v = fresh_var(&s);
    rec(v.clone(), choice(s, all(var(v))))
}

/// Deliberately bogus: `all` on the left of the choice succeeds everywhere, so `s`
/// is never applied. Kept constructible; loading a program that uses it warns.
pub fn stop_bu(s: Strategy) -> Strategy {
    let v = fresh_var(&s);
    rec(v.clone(), choice(all(var(v)), s))
}

pub fn innermost(s: Strategy) -> Strategy {
    repeat(once_bu(s))
}

pub const STOP_BU_WARNING: &str =
    "stop_bu never applies its argument: the traversal on the left of the choice always succeeds first";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    FullTd,
    FullBu,
    OnceTd,
    OnceBu,
    StopTd,
    StopBu,
    Innermost,
    Repeat,
    Try,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::FullTd,
        Scheme::FullBu,
        Scheme::OnceTd,
        Scheme::OnceBu,
        Scheme::StopTd,
        Scheme::StopBu,
        Scheme::Innermost,
        Scheme::Repeat,
        Scheme::Try,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::FullTd => "full_td",
            Scheme::FullBu => "full_bu",
            Scheme::OnceTd => "once_td",
            Scheme::OnceBu => "once_bu",
            Scheme::StopTd => "stop_td",
            Scheme::StopBu => "stop_bu",
            Scheme::Innermost => "innermost",
            Scheme::Repeat => "repeat",
            Scheme::Try => "try",
        }
    }

    pub fn from_name(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn apply(self, s: Strategy) -> Strategy {
        match self {
            Scheme::FullTd => full_td(s),
            Scheme::FullBu => full_bu(s),
            Scheme::OnceTd => once_td(s),
            Scheme::OnceBu => once_bu(s),
            Scheme::StopTd => stop_td(s),
            Scheme::StopBu => stop_bu(s),
            Scheme::Innermost => innermost(s),
            Scheme::Repeat => repeat(s),
            Scheme::Try => try_(s),
        }
    }

    /// Default hard-wired into the primed variant, for schemes that have one.
    pub fn primed_default(self) -> Option<Strategy> {
        match self {
            Scheme::FullTd | Scheme::FullBu => Some(Strategy::Id),
            Scheme::OnceTd | Scheme::OnceBu | Scheme::StopTd | Scheme::Innermost => Some(Strategy::Fail),
            Scheme::StopBu | Scheme::Repeat | Scheme::Try => None,
        }
    }

    /// `full_td1` and friends: the scheme over `adhoc(default, rule)`.
    pub fn primed(self, rule_name: &str) -> Option<Strategy> {
        self.primed_default().map(|d| self.apply(adhoc(d, rule_name)))
    }

    pub fn from_primed_name(name: &str) -> Option<Scheme> {
        let base = name.strip_suffix('1')?;
        Scheme::from_name(base).filter(|s| s.primed_default().is_some())
    }
}

/// Right fold of adhoc over the cases: the first case whose sort matches wins.
pub fn family<S: AsRef<str>>(cases: &[S], default: Strategy) -> Strategy {
    cases.iter().rev().fold(default, |acc, c| adhoc(acc, c.as_ref()))
}

/// Locations of `rec v. all(v) <+ s`, the shape that makes `s` unreachable.
pub fn stop_bu_shapes(s: &Strategy) -> Vec<String> {
    let mut out = Vec::new();
    walk_paths(s, &mut String::new(), &mut |p, e| {
        if let Strategy::Rec(v, body) = e {
            if let Strategy::Choice(l, _) = &**body {
                if matches!(&**l, Strategy::All(x) if **x == Strategy::Var(v.clone())) {
                    out.push(p.to_string());
                }
            }
        }
    });
    out
}

/// Visits every subexpression with a path such as `/rec/choice.1/all`.
pub fn walk_paths<'a>(s: &'a Strategy, path: &mut String, f: &mut impl FnMut(&str, &'a Strategy)) {
    f(if path.is_empty() { "/" } else { path }, s);
    let len = path.len();
    let mut sub = |path: &mut String, step: &str, e: &'a Strategy| {
        path.push('/');
        path.push_str(step);
        walk_paths(e, path, f);
        path.truncate(len);
    };
    match s {
        Strategy::Seq(a, b) => {
            sub(path, "seq.0", a);
            sub(path, "seq.1", b);
        }
        Strategy::Choice(a, b) => {
            sub(path, "choice.0", a);
            sub(path, "choice.1", b);
        }
        Strategy::All(e) => sub(path, "all", e),
        Strategy::One(e) => sub(path, "one", e),
        Strategy::Rec(_, e) => sub(path, "rec", e),
        Strategy::Adhoc(e, _) => sub(path, "adhoc", e),
        Strategy::Id | Strategy::Fail | Strategy::Var(_) | Strategy::Rule(_) => {}
    }
}

/// Renders with the concrete syntax; `;` binds tighter than `<+`, both associate left.
impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 0, true, f)
    }
}

// 0: anything, 1: operand of `<+` on the right or `;` on the left, 2: atom.
// `rec` extends as far right as possible, so it is bracketed unless it ends the text.
fn write_prec(s: &Strategy, prec: u8, trailing: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match s {
        Strategy::Id => f.write_str("id"),
        Strategy::Fail => f.write_str("fail"),
        Strategy::Var(v) | Strategy::Rule(v) => f.write_str(v),
        Strategy::All(e) => {
            f.write_str("all(")?;
            write_prec(e, 0, true, f)?;
            f.write_str(")")
        }
        Strategy::One(e) => {
            f.write_str("one(")?;
            write_prec(e, 0, true, f)?;
            f.write_str(")")
        }
        Strategy::Adhoc(e, r) => {
            f.write_str("adhoc(")?;
            write_prec(e, 0, true, f)?;
            write!(f, ", {r})")
        }
        Strategy::Choice(a, b) => {
            let paren = prec > 0;
            if paren {
                f.write_str("(")?;
            }
            write_prec(a, 0, false, f)?;
            f.write_str(" <+ ")?;
            write_prec(b, 1, trailing || paren, f)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        Strategy::Seq(a, b) => {
            let paren = prec > 1;
            if paren {
                f.write_str("(")?;
            }
            write_prec(a, 1, false, f)?;
            f.write_str("; ")?;
            write_prec(b, 2, trailing || paren, f)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
        Strategy::Rec(v, b) => {
            let paren = prec > 0 || !trailing;
            if paren {
                f.write_str("(")?;
            }
            write!(f, "rec {v}. ")?;
            write_prec(b, 0, true, f)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}
