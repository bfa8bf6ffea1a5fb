//! The program language: rules, query rules, definitions and entry points.
//!
//! ```text
//! rule inc : Nat = n -> (Succ n) @measure(Any)
//! rule fix : Nat = choice(atEven, atOdd)
//! qrule salary : Salary = s => s
//! def twice(s) = s; s
//! main = stop_td1(inc)
//! query = full_cl(adhocq(failq, salary))
//! ```
//!
//! Definitions are macros: each call site is replaced by the body with arguments
//! substituted, avoiding capture. Names in a body resolve where the definition is
//! written, never at the call site.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::error::{Diagnostic, ParseError};
use crate::query::{familyq, QueryExpr, QueryRule, QueryRules, Value, ValueExpr};
use crate::rules::{check_pattern, guard_arity, Guard, RuleBody, RuleDef, RuleSet};
use crate::signature::Signature;
use crate::strategy::{self, stop_bu_shapes, Scheme, Strategy, STOP_BU_WARNING};
use crate::syntax::{lex, read_literal, Cursor, Tok};
use crate::term::{Pattern, PrimOp};
use crate::termination::Rel;

const KEYWORDS: &[&str] = &["rule", "qrule", "def", "main", "query", "where", "id", "fail", "all", "one", "rec", "adhoc", "family"];

/// A parameterised strategy definition after expansion; parameters occur free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub params: Vec<String>,
    pub body: Strategy,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub sig: Signature,
    pub rules: RuleSet,
    pub qrules: QueryRules,
    /// In source order.
    pub defs: Vec<Definition>,
    pub main: Option<Strategy>,
    pub query: Option<QueryExpr>,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{}", render(.0))]
    Invalid(Vec<Diagnostic>),
}

fn render(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Surface syntax before name resolution and macro expansion.
#[derive(Debug, Clone)]
enum Expr {
    Id,
    Fail,
    Name(String, Pos),
    Seq(Box<Expr>, Box<Expr>),
    Choice(Box<Expr>, Box<Expr>),
    All(Box<Expr>),
    One(Box<Expr>),
    Rec(String, Box<Expr>),
    Adhoc(Box<Expr>, String, Pos),
    Family(Vec<String>, Box<Expr>, Pos),
    Call(String, Vec<Expr>, Pos),
}

#[derive(Debug, Clone)]
enum QExpr {
    Q(QueryExpr),
    Family(Vec<String>, Box<QExpr>, Pos),
    Both(Box<QExpr>, Box<QExpr>),
    Choice(Box<QExpr>, Box<QExpr>),
    All(Box<QExpr>),
    Adhoc(Box<QExpr>, String, Pos),
    Scheme(&'static str, Box<QExpr>),
}

struct DefSrc {
    params: Vec<String>,
    body: Expr,
}

struct Parsed {
    rules: Vec<(RuleDef, Pos)>,
    qrules: Vec<(QueryRule, Pos)>,
    defs: Vec<(String, DefSrc, Pos)>,
    main: Option<Expr>,
    query: Option<QExpr>,
}

struct Parser<'a> {
    cur: Cursor,
    sig: &'a Signature,
}

impl Parser<'_> {
    fn pos(&self) -> Pos {
        let t = self.cur.here();
        Pos { line: t.line, col: t.col }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.cur.peek(), Tok::Ident(s) if s == kw) {
            self.cur.next();
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        let pos = self.pos();
        let n = self.cur.ident()?;
        if KEYWORDS.contains(&n.as_str()) {
            return Err(ParseError::new(pos.line, pos.col, format!("`{n}` is a keyword")));
        }
        Ok(n)
    }

    fn sort(&mut self) -> Result<String, ParseError> {
        if self.cur.eat(&Tok::LBrack) {
            let s = self.cur.ident()?;
            self.cur.expect(&Tok::RBrack)?;
            Ok(format!("[{s}]"))
        } else {
            self.cur.ident()
        }
    }

    fn program(&mut self) -> Result<Parsed, ParseError> {
        let mut p = Parsed { rules: Vec::new(), qrules: Vec::new(), defs: Vec::new(), main: None, query: None };
        while !self.cur.at_eof() {
            let pos = self.pos();
            let kw = match self.cur.peek() {
                Tok::Ident(s) => s.clone(),
                other => return Err(self.cur.error(format!("expected a declaration, found {other}"))),
            };
            self.cur.next();
            match kw.as_str() {
                "rule" => p.rules.push((self.rule()?, pos)),
                "qrule" => p.qrules.push((self.qrule()?, pos)),
                "def" => {
                    let name = self.name()?;
                    let mut params = Vec::new();
                    if self.cur.eat(&Tok::LParen) && !self.cur.eat(&Tok::RParen) {
                        loop {
                            params.push(self.name()?);
                            if self.cur.list_sep(&Tok::RParen)? {
                                break;
                            }
                        }
                    }
                    self.cur.expect(&Tok::Eq)?;
                    let body = self.expr()?;
                    p.defs.push((name, DefSrc { params, body }, pos));
                }
                "main" => {
                    if p.main.is_some() {
                        return Err(ParseError::new(pos.line, pos.col, "`main` is defined twice"));
                    }
                    self.cur.expect(&Tok::Eq)?;
                    p.main = Some(self.expr()?);
                }
                "query" => {
                    if p.query.is_some() {
                        return Err(ParseError::new(pos.line, pos.col, "`query` is defined twice"));
                    }
                    self.cur.expect(&Tok::Eq)?;
                    p.query = Some(self.qexpr()?);
                }
                other => {
                    return Err(ParseError::new(
                        pos.line,
                        pos.col,
                        format!("expected `rule`, `qrule`, `def`, `main` or `query`, found `{other}`"),
                    ))
                }
            }
        }
        Ok(p)
    }

    fn rule(&mut self) -> Result<RuleDef, ParseError> {
        let name = self.name()?;
        self.cur.expect(&Tok::Colon)?;
        let sort = self.sort()?;
        self.cur.expect(&Tok::Eq)?;
        let composite = matches!(self.cur.peek(), Tok::Ident(s) if s == "choice" || s == "seq")
            && self.cur.peek_at(1) == &Tok::LParen;
        let body = if composite {
            let kind = self.cur.ident()?;
            self.cur.expect(&Tok::LParen)?;
            let a = self.cur.ident()?;
            self.cur.expect(&Tok::Comma)?;
            let b = self.cur.ident()?;
            self.cur.expect(&Tok::RParen)?;
            if kind == "choice" {
                RuleBody::Choice(a, b)
            } else {
                RuleBody::Seq(a, b)
            }
        } else {
            let lhs = self.pattern(Some(&sort))?;
            self.cur.expect(&Tok::Arrow)?;
            let rhs = self.pattern(Some(&sort))?;
            let guard = self.guard()?;
            RuleBody::Rewrite { lhs, rhs, guard }
        };
        let mut r = RuleDef { name, sort, body, infallible: false, measure: None };
        while self.cur.eat(&Tok::At) {
            let pos = self.pos();
            match self.cur.ident()?.as_str() {
                "infallible" => r.infallible = true,
                "measure" => {
                    self.cur.expect(&Tok::LParen)?;
                    let mut v = Vec::new();
                    loop {
                        let p = self.pos();
                        let w = self.cur.ident()?;
                        v.push(Rel::parse(&w).ok_or_else(|| {
                            ParseError::new(p.line, p.col, format!("expected `Less`, `Leq` or `Any`, found `{w}`"))
                        })?);
                        if self.cur.list_sep(&Tok::RParen)? {
                            break;
                        }
                    }
                    r.measure = Some(v);
                }
                other => return Err(ParseError::new(pos.line, pos.col, format!("unknown annotation `@{other}`"))),
            }
        }
        Ok(r)
    }

    fn guard(&mut self) -> Result<Option<Guard>, ParseError> {
        if !self.keyword("where") {
            return Ok(None);
        }
        let pred = self.cur.ident()?;
        self.cur.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        if !self.cur.eat(&Tok::RParen) {
            loop {
                args.push(self.pattern(None)?);
                if self.cur.list_sep(&Tok::RParen)? {
                    break;
                }
            }
        }
        Ok(Some(Guard { pred, args }))
    }

    fn qrule(&mut self) -> Result<QueryRule, ParseError> {
        let name = self.name()?;
        self.cur.expect(&Tok::Colon)?;
        let sort = self.sort()?;
        self.cur.expect(&Tok::Eq)?;
        let pattern = self.pattern(Some(&sort))?;
        let guard = self.guard()?;
        self.cur.expect(&Tok::FatArrow)?;
        let value = match self.cur.peek().clone() {
            Tok::Ident(v) => {
                self.cur.next();
                ValueExpr::Var(v)
            }
            Tok::Int(i) => {
                self.cur.next();
                ValueExpr::Const(Value::Int(i))
            }
            Tok::Float(x) => {
                self.cur.next();
                ValueExpr::Const(Value::Float(x))
            }
            Tok::Str(s) => {
                self.cur.next();
                ValueExpr::Const(Value::Str(s))
            }
            other => return Err(self.cur.error(format!("expected a variable or a constant, found {other}"))),
        };
        Ok(QueryRule { name, sort, pattern, guard, value })
    }

    /// Lower-case identifiers are variables, capitalised ones constructors.
    fn pattern(&mut self, expected: Option<&str>) -> Result<Pattern, ParseError> {
        match self.cur.peek().clone() {
            Tok::Ident(s) => {
                self.cur.next();
                if s.starts_with(|c: char| c.is_uppercase()) {
                    Ok(Pattern::constant(s))
                } else {
                    Ok(Pattern::Var(s))
                }
            }
            Tok::Int(_) | Tok::Float(_) | Tok::Str(_) => {
                let (lit, sort) = read_literal(&mut self.cur, Some(self.sig), expected)?;
                Ok(Pattern::Lit(lit, sort))
            }
            Tok::LParen => {
                self.cur.next();
                let head = self.cur.next();
                let mut kids = Vec::new();
                match head.tok {
                    Tok::Op(op) => {
                        while !self.cur.eat(&Tok::RParen) {
                            kids.push(self.pattern(expected)?);
                        }
                        Ok(Pattern::Op(op, kids))
                    }
                    Tok::Ident(c) => {
                        let arg_sorts = self.sig.symbol(&c).map(|s| s.arg_sorts.clone()).unwrap_or_default();
                        while !self.cur.eat(&Tok::RParen) {
                            let exp = arg_sorts.get(kids.len()).map(String::as_str);
                            kids.push(self.pattern(exp)?);
                        }
                        Ok(Pattern::Node(c, kids))
                    }
                    other => Err(ParseError::new(head.line, head.col, format!("expected a constructor, found {other}"))),
                }
            }
            other => Err(self.cur.error(format!("expected a pattern, found {other}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.seq_expr()?;
        while self.cur.eat(&Tok::LeftChoice) {
            let rhs = self.seq_expr()?;
            lhs = Expr::Choice(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn seq_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.prim()?;
        while self.cur.eat(&Tok::Semi) {
            let rhs = self.prim()?;
            lhs = Expr::Seq(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.cur.expect(&Tok::LParen)?;
        let e = self.expr()?;
        self.cur.expect(&Tok::RParen)?;
        Ok(e)
    }

    fn name_list(&mut self) -> Result<Vec<String>, ParseError> {
        self.cur.expect(&Tok::LBrack)?;
        let mut out = Vec::new();
        if !self.cur.eat(&Tok::RBrack) {
            loop {
                out.push(self.cur.ident()?);
                if self.cur.list_sep(&Tok::RBrack)? {
                    break;
                }
            }
        }
        Ok(out)
    }

    fn prim(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.cur.peek().clone() {
            Tok::LParen => self.unary(),
            Tok::Ident(w) => {
                self.cur.next();
                match w.as_str() {
                    "id" => Ok(Expr::Id),
                    "fail" => Ok(Expr::Fail),
                    "all" => Ok(Expr::All(Box::new(self.unary()?))),
                    "one" => Ok(Expr::One(Box::new(self.unary()?))),
                    "rec" => {
                        let v = self.name()?;
                        self.cur.expect(&Tok::Dot)?;
                        Ok(Expr::Rec(v, Box::new(self.expr()?)))
                    }
                    "adhoc" => {
                        self.cur.expect(&Tok::LParen)?;
                        let d = self.expr()?;
                        self.cur.expect(&Tok::Comma)?;
                        let rpos = self.pos();
                        let r = self.cur.ident()?;
                        self.cur.expect(&Tok::RParen)?;
                        Ok(Expr::Adhoc(Box::new(d), r, rpos))
                    }
                    "family" => {
                        self.cur.expect(&Tok::LParen)?;
                        let cases = self.name_list()?;
                        self.cur.expect(&Tok::Comma)?;
                        let d = self.expr()?;
                        self.cur.expect(&Tok::RParen)?;
                        Ok(Expr::Family(cases, Box::new(d), pos))
                    }
                    _ if KEYWORDS.contains(&w.as_str()) => {
                        Err(ParseError::new(pos.line, pos.col, format!("unexpected keyword `{w}`")))
                    }
                    _ if self.cur.peek() == &Tok::LParen => {
                        self.cur.next();
                        let mut args = Vec::new();
                        if !self.cur.eat(&Tok::RParen) {
                            loop {
                                args.push(self.expr()?);
                                if self.cur.list_sep(&Tok::RParen)? {
                                    break;
                                }
                            }
                        }
                        Ok(Expr::Call(w, args, pos))
                    }
                    _ => Ok(Expr::Name(w, pos)),
                }
            }
            other => Err(self.cur.error(format!("expected a strategy, found {other}"))),
        }
    }

    fn qexpr(&mut self) -> Result<QExpr, ParseError> {
        let mut lhs = self.qprim()?;
        while self.cur.eat(&Tok::LeftChoice) {
            let rhs = self.qprim()?;
            lhs = QExpr::Choice(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn qunary(&mut self) -> Result<QExpr, ParseError> {
        self.cur.expect(&Tok::LParen)?;
        let e = self.qexpr()?;
        self.cur.expect(&Tok::RParen)?;
        Ok(e)
    }

    fn qprim(&mut self) -> Result<QExpr, ParseError> {
        let pos = self.pos();
        let w = match self.cur.peek().clone() {
            Tok::LParen => return self.qunary(),
            Tok::Ident(w) => w,
            other => return Err(self.cur.error(format!("expected a query, found {other}"))),
        };
        self.cur.next();
        match w.as_str() {
            "failq" => Ok(QExpr::Q(QueryExpr::Fail)),
            "constq" => {
                self.cur.expect(&Tok::LParen)?;
                let v = match self.cur.next().tok {
                    Tok::Int(i) => Value::Int(i),
                    Tok::Float(x) => Value::Float(x),
                    Tok::Str(s) => Value::Str(s),
                    other => return Err(ParseError::new(pos.line, pos.col, format!("expected a constant, found {other}"))),
                };
                self.cur.expect(&Tok::RParen)?;
                Ok(QExpr::Q(QueryExpr::Const(v)))
            }
            "bothq" => {
                self.cur.expect(&Tok::LParen)?;
                let a = self.qexpr()?;
                self.cur.expect(&Tok::Comma)?;
                let b = self.qexpr()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(QExpr::Both(Box::new(a), Box::new(b)))
            }
            "allq" => Ok(QExpr::All(Box::new(self.qunary()?))),
            "full_cl" => Ok(QExpr::Scheme("full_cl", Box::new(self.qunary()?))),
            "stop_cl" => Ok(QExpr::Scheme("stop_cl", Box::new(self.qunary()?))),
            "once_cl" => Ok(QExpr::Scheme("once_cl", Box::new(self.qunary()?))),
            "adhocq" => {
                self.cur.expect(&Tok::LParen)?;
                let d = self.qexpr()?;
                self.cur.expect(&Tok::Comma)?;
                let rpos = self.pos();
                let r = self.cur.ident()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(QExpr::Adhoc(Box::new(d), r, rpos))
            }
            "familyq" => {
                self.cur.expect(&Tok::LParen)?;
                let cases = self.name_list()?;
                self.cur.expect(&Tok::Comma)?;
                let d = self.qexpr()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(QExpr::Family(cases, Box::new(d), pos))
            }
            other => Err(ParseError::new(pos.line, pos.col, format!("unknown query combinator `{other}`"))),
        }
    }
}

/// Resolves names and expands macros.
struct Expander<'a> {
    rules: &'a RuleSet,
    srcs: BTreeMap<String, (&'a DefSrc, Pos)>,
    done: BTreeMap<String, Definition>,
    in_progress: Vec<String>,
    errors: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
}

impl Expander<'_> {
    fn def(&mut self, name: &str) -> Option<Definition> {
        if let Some(d) = self.done.get(name) {
            return Some(d.clone());
        }
        let (src, _) = *self.srcs.get(name)?;
        if self.in_progress.iter().any(|n| n == name) {
            let mut cycle = self.in_progress.clone();
            cycle.push(name.to_string());
            self.errors.push(Diagnostic::error(
                format!("def {name}"),
                format!("definitions expand into themselves: {}", cycle.join(" -> ")),
            ));
            return None;
        }
        self.in_progress.push(name.to_string());
        let ctx = format!("def {name}");
        let mut bound: Vec<String> = src.params.clone();
        let body = self.expand(&src.body, &mut bound, &ctx);
        self.in_progress.pop();
        let body = body?;
        let free = free_occurrences(&body);
        for p in &src.params {
            let n = free.get(p).copied().unwrap_or(0);
            if n > 1 {
                self.warnings.push(Diagnostic::warning(
                    &ctx,
                    format!("parameter `{p}` is used {n} times; each use copies the argument"),
                ));
            }
        }
        let d = Definition { name: name.to_string(), params: src.params.clone(), body };
        self.done.insert(name.to_string(), d.clone());
        Some(d)
    }

    fn error(&mut self, ctx: &str, pos: Pos, msg: String) -> Option<Strategy> {
        self.errors.push(Diagnostic::error(ctx, format!("{pos}: {msg}")));
        None
    }

    fn rule_known(&mut self, ctx: &str, pos: Pos, r: &str) -> bool {
        if self.rules.contains(r) {
            true
        } else {
            self.error(ctx, pos, format!("unknown rule `{r}`"));
            false
        }
    }

    fn expand(&mut self, e: &Expr, bound: &mut Vec<String>, ctx: &str) -> Option<Strategy> {
        Some(match e {
            Expr::Id => Strategy::Id,
            Expr::Fail => Strategy::Fail,
            Expr::Seq(a, b) => {
                let x = self.expand(a, bound, ctx);
                let y = self.expand(b, bound, ctx);
                strategy::seq(x?, y?)
            }
            Expr::Choice(a, b) => {
                let x = self.expand(a, bound, ctx);
                let y = self.expand(b, bound, ctx);
                strategy::choice(x?, y?)
            }
            Expr::All(a) => strategy::all(self.expand(a, bound, ctx)?),
            Expr::One(a) => strategy::one(self.expand(a, bound, ctx)?),
            Expr::Rec(v, body) => {
                bound.push(v.clone());
                let b = self.expand(body, bound, ctx);
                bound.pop();
                strategy::rec(v.clone(), b?)
            }
            Expr::Adhoc(d, r, pos) => {
                let d = self.expand(d, bound, ctx);
                if !self.rule_known(ctx, *pos, r) {
                    return None;
                }
                strategy::adhoc(d?, r.clone())
            }
            Expr::Family(cases, d, pos) => {
                let d = self.expand(d, bound, ctx);
                let mut ok = true;
                for c in cases {
                    ok &= self.rule_known(ctx, *pos, c);
                }
                if !ok {
                    return None;
                }
                let sorted: Vec<(&str, &str)> =
                    cases.iter().map(|c| (c.as_str(), self.rules.sort_of_rule(c).unwrap_or(""))).collect();
                for (i, (a, sa)) in sorted.iter().enumerate() {
                    for (b, sb) in &sorted[i + 1..] {
                        if sa == sb {
                            self.error(
                                ctx,
                                *pos,
                                format!("family cases `{a}` and `{b}` both have sort `{sa}`: `{a}` shadows `{b}`, which is dead code"),
                            );
                            ok = false;
                        }
                    }
                }
                if !ok {
                    return None;
                }
                strategy::family(cases, d?)
            }
            Expr::Name(n, pos) => {
                if bound.iter().any(|b| b == n) {
                    Strategy::Var(n.clone())
                } else if self.rules.contains(n) {
                    Strategy::Rule(n.clone())
                } else if self.srcs.contains_key(n) || self.done.contains_key(n) {
                    let d = self.def(n)?;
                    if !d.params.is_empty() {
                        return self.error(ctx, *pos, format!("`{n}` takes {} argument(s)", d.params.len()));
                    }
                    d.body
                } else if Scheme::from_name(n).is_some() || Scheme::from_primed_name(n).is_some() {
                    return self.error(ctx, *pos, format!("scheme `{n}` needs an argument"));
                } else {
                    return self.error(ctx, *pos, format!("unknown name `{n}`"));
                }
            }
            Expr::Call(f, args, pos) => {
                let mut xs = Vec::new();
                if let Some(scheme) = Scheme::from_primed_name(f) {
                    if !self.srcs.contains_key(f) && !self.done.contains_key(f) {
                        return match args.as_slice() {
                            [Expr::Name(r, rpos)] if !bound.contains(r) => {
                                if !self.rule_known(ctx, *rpos, r) {
                                    return None;
                                }
                                scheme.primed(r)
                            }
                            _ => self.error(ctx, *pos, format!("`{f}` takes exactly one rule name")),
                        };
                    }
                }
                for a in args {
                    xs.push(self.expand(a, bound, ctx));
                }
                let xs: Vec<Strategy> = xs.into_iter().collect::<Option<_>>()?;
                if self.srcs.contains_key(f) || self.done.contains_key(f) {
                    let d = self.def(f)?;
                    if d.params.len() != xs.len() {
                        return self.error(
                            ctx,
                            *pos,
                            format!("`{f}` takes {} argument(s), given {}", d.params.len(), xs.len()),
                        );
                    }
                    let m: BTreeMap<String, Strategy> = d.params.iter().cloned().zip(xs).collect();
                    d.body.subst_many(&m)
                } else if let Some(scheme) = Scheme::from_name(f) {
                    let [x] = <[Strategy; 1]>::try_from(xs).ok().or_else(|| {
                        self.error(ctx, *pos, format!("`{f}` takes exactly one argument"));
                        None
                    })?;
                    if scheme == Scheme::StopBu {
                        self.warnings.push(Diagnostic::warning(ctx, format!("{pos}: {STOP_BU_WARNING}")));
                    }
                    scheme.apply(x)
                } else {
                    return self.error(ctx, *pos, format!("unknown definition or scheme `{f}`"));
                }
            }
        })
    }

    fn query(&mut self, q: &QExpr, qrules: &QueryRules) -> Option<QueryExpr> {
        let ctx = "query";
        let known = |this: &mut Self, r: &str, pos: Pos| {
            if qrules.contains_key(r) {
                true
            } else {
                this.error(ctx, pos, format!("unknown query rule `{r}`"));
                false
            }
        };
        Some(match q {
            QExpr::Q(q) => q.clone(),
            QExpr::Both(a, b) => {
                let x = self.query(a, qrules);
                let y = self.query(b, qrules);
                QueryExpr::Both(Box::new(x?), Box::new(y?))
            }
            QExpr::Choice(a, b) => {
                let x = self.query(a, qrules);
                let y = self.query(b, qrules);
                QueryExpr::Choice(Box::new(x?), Box::new(y?))
            }
            QExpr::All(a) => QueryExpr::All(Box::new(self.query(a, qrules)?)),
            QExpr::Scheme(k, a) => {
                let inner = Box::new(self.query(a, qrules)?);
                match *k {
                    "full_cl" => QueryExpr::FullCl(inner),
                    "stop_cl" => QueryExpr::StopCl(inner),
                    _ => QueryExpr::OnceCl(inner),
                }
            }
            QExpr::Adhoc(d, r, pos) => {
                let d = self.query(d, qrules);
                if !known(self, r, *pos) {
                    return None;
                }
                QueryExpr::Adhoc(Box::new(d?), r.clone())
            }
            QExpr::Family(cases, d, pos) => {
                let d = self.query(d, qrules);
                let mut ok = true;
                for c in cases {
                    ok &= known(self, c, *pos);
                }
                if !ok {
                    return None;
                }
                for (i, a) in cases.iter().enumerate() {
                    for b in &cases[i + 1..] {
                        if qrules[a].sort == qrules[b].sort {
                            self.error(
                                ctx,
                                *pos,
                                format!("family cases `{a}` and `{b}` both have sort `{}`: `{b}` is dead code", qrules[a].sort),
                            );
                            ok = false;
                        }
                    }
                }
                if !ok {
                    return None;
                }
                familyq(cases, d?)
            }
        })
    }
}

fn free_occurrences(s: &Strategy) -> BTreeMap<String, usize> {
    fn go(s: &Strategy, bound: &mut Vec<String>, out: &mut BTreeMap<String, usize>) {
        match s {
            Strategy::Var(v) if !bound.contains(v) => *out.entry(v.clone()).or_default() += 1,
            Strategy::Rec(v, b) => {
                bound.push(v.clone());
                go(b, bound, out);
                bound.pop();
            }
            _ => {
                for c in s.children() {
                    go(c, bound, out);
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    go(s, &mut Vec::new(), &mut out);
    out
}

/// Warnings about strategy shapes that hide dead code.
pub fn lint_strategy(ctx: &str, s: &Strategy, rules: &RuleSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for p in stop_bu_shapes(s) {
        out.push(Diagnostic::warning(
            ctx,
            format!("at {p}: `rec v. all(v) <+ s` never applies `s`; the traversal is a deep identity"),
        ));
    }
    strategy::walk_paths(s, &mut String::new(), &mut |p, e| {
        // Collect the cases of a chain of nested adhocs; an inner case whose sort
        // is already handled further out can never fire.
        if let Strategy::Adhoc(_, outer) = e {
            let mut seen: Vec<(&str, &str)> = Vec::new();
            let mut cur = e;
            while let Strategy::Adhoc(d, r) = cur {
                let sort = rules.sort_of_rule(r).unwrap_or("");
                if let Some((winner, _)) = seen.iter().find(|(_, s)| *s == sort) {
                    if r != outer || seen.len() > 1 {
                        out.push(Diagnostic::warning(
                            ctx,
                            format!("at {p}: case `{r}` is dominated by `{winner}` on sort `{sort}` and never fires"),
                        ));
                    }
                }
                seen.push((r, sort));
                cur = d;
            }
        }
    });
    out.dedup();
    out
}

fn lint_rules(rules: &RuleSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for r in rules.iter() {
        if let RuleBody::Rewrite { lhs, guard, .. } = &r.body {
            if r.infallible && (!lhs.is_var() || guard.is_some()) {
                out.push(Diagnostic::warning(
                    &r.name,
                    "infallibility claim ignored: only an unguarded rule with a variable left-hand side qualifies",
                ));
            }
        }
    }
    out
}

fn check_qrule(sig: &Signature, q: &QueryRule) -> Vec<Diagnostic> {
    let err = |m: String| Diagnostic::error(format!("qrule {}", q.name), m);
    let mut out = Vec::new();
    if !sig.has_sort(&q.sort) {
        return vec![err(format!("unknown sort `{}`", q.sort))];
    }
    let mut vars = BTreeMap::new();
    if q.pattern.contains_op() {
        out.push(err("arithmetic is not allowed in query patterns".into()));
    }
    if let Err(m) = check_pattern(sig, &q.pattern, &q.sort, &mut vars) {
        out.push(err(m));
    }
    if let ValueExpr::Var(x) = &q.value {
        if !vars.contains_key(x) {
            out.push(err(format!("result variable `{x}` is not bound by the pattern")));
        }
    }
    if let Some(g) = &q.guard {
        if guard_arity(&g.pred) != Some(g.args.len()) {
            out.push(err(format!("unknown guard `{}` or wrong number of arguments", g.pred)));
        }
    }
    out
}

impl Program {
    /// Parses and checks a program against `sig`.
    pub fn load(sig: Signature, text: &str) -> Result<Program, LoadError> {
        let parsed = Parser { cur: Cursor::new(lex(text)?), sig: &sig }.program()?;
        let mut errors = Vec::new();

        let mut rules = RuleSet::new();
        for (r, pos) in parsed.rules {
            let name = r.name.clone();
            if rules.insert(r).is_some() {
                errors.push(Diagnostic::error(&name, format!("{pos}: rule defined twice")));
            }
        }
        errors.extend(rules.check(&sig).into_iter().filter(Diagnostic::is_error));

        let mut qrules = QueryRules::new();
        for (q, pos) in parsed.qrules {
            errors.extend(check_qrule(&sig, &q));
            if let Some(old) = qrules.insert(q.name.clone(), q) {
                errors.push(Diagnostic::error(format!("qrule {}", old.name), format!("{pos}: query rule defined twice")));
            }
        }

        let mut srcs = BTreeMap::new();
        for (name, src, pos) in &parsed.defs {
            if srcs.insert(name.clone(), (src, *pos)).is_some() {
                errors.push(Diagnostic::error(format!("def {name}"), format!("{pos}: defined twice")));
            }
            if rules.contains(name) {
                errors.push(Diagnostic::error(format!("def {name}"), format!("{pos}: clashes with the rule of the same name")));
            }
        }

        let mut ex = Expander {
            rules: &rules,
            srcs,
            done: BTreeMap::new(),
            in_progress: Vec::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
        };
        let mut defs = Vec::new();
        for (name, _, _) in &parsed.defs {
            if let Some(d) = ex.def(name) {
                if !defs.iter().any(|x: &Definition| x.name == d.name) {
                    defs.push(d);
                }
            }
        }
        let main = parsed.main.as_ref().and_then(|e| ex.expand(e, &mut Vec::new(), "main"));
        let query = parsed.query.as_ref().and_then(|q| ex.query(q, &qrules));
        errors.append(&mut ex.errors);
        let mut warnings = std::mem::take(&mut ex.warnings);
        if !errors.is_empty() {
            errors.dedup();
            return Err(LoadError::Invalid(errors));
        }

        warnings.extend(lint_rules(&rules));
        for d in &defs {
            warnings.extend(lint_strategy(&format!("def {}", d.name), &d.body, &rules));
        }
        if let Some(m) = &main {
            warnings.extend(lint_strategy("main", m, &rules));
        }
        Ok(Program { sig, rules, qrules, defs, main, query, warnings })
    }

    /// Parses a signature and a program from source text.
    pub fn load_texts(sig_text: &str, program_text: &str) -> Result<Program, LoadError> {
        let sig = Signature::parse(sig_text)?;
        Program::load(sig, program_text)
    }

    /// Parses a strategy expression in the scope of this program's rules and definitions.
    pub fn strategy(&self, text: &str) -> Result<Strategy, LoadError> {
        let mut p = Parser { cur: Cursor::new(lex(text)?), sig: &self.sig };
        let e = p.expr()?;
        if !p.cur.at_eof() {
            return Err(p.cur.error(format!("unexpected {} after the expression", p.cur.peek())).into());
        }
        let mut ex = Expander {
            rules: &self.rules,
            srcs: BTreeMap::new(),
            done: self.defs.iter().map(|d| (d.name.clone(), d.clone())).collect(),
            in_progress: Vec::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
        };
        match ex.expand(&e, &mut Vec::new(), "expression") {
            Some(s) if ex.errors.is_empty() => Ok(s),
            _ => Err(LoadError::Invalid(ex.errors)),
        }
    }

    /// Parses a query expression in the scope of this program's query rules.
    pub fn query_expr(&self, text: &str) -> Result<QueryExpr, LoadError> {
        let mut p = Parser { cur: Cursor::new(lex(text)?), sig: &self.sig };
        let q = p.qexpr()?;
        if !p.cur.at_eof() {
            return Err(p.cur.error(format!("unexpected {} after the query", p.cur.peek())).into());
        }
        let mut ex = Expander {
            rules: &self.rules,
            srcs: BTreeMap::new(),
            done: BTreeMap::new(),
            in_progress: Vec::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
        };
        match ex.query(&q, &self.qrules) {
            Some(q) if ex.errors.is_empty() => Ok(q),
            _ => Err(LoadError::Invalid(ex.errors)),
        }
    }

    pub fn def(&self, name: &str) -> Option<&Definition> {
        self.defs.iter().find(|d| d.name == name)
    }

    /// Named strategies for per-definition reports: every definition, then `main`.
    pub fn entries(&self) -> Vec<(String, &Strategy, &[String])> {
        let mut out: Vec<(String, &Strategy, &[String])> =
            self.defs.iter().map(|d| (d.name.clone(), &d.body, d.params.as_slice())).collect();
        if let Some(m) = &self.main {
            out.push(("main".to_string(), m, &[]));
        }
        out
    }

    /// Rule names used anywhere in definitions or `main`.
    pub fn used_rules(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (_, s, _) in self.entries() {
            out.extend(s.rule_names());
        }
        out
    }
}

/// Literal pattern helper mirroring the parser's handling of `(+ x 1)`.
pub fn op_pattern(op: PrimOp, args: Vec<Pattern>) -> Pattern {
    Pattern::Op(op, args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::strategy::{adhoc, full_td, rule, stop_td, var};

    fn nat_program(text: &str) -> Result<Program, LoadError> {
        Program::load(fixtures::nat_tree_signature(), text)
    }

    const INC: &str = "rule increment : Nat = n -> (Succ n)\n";

    #[test]
    fn valid_increment_program() {
        let p = nat_program(&format!("{INC}main = stop_td1(increment)")).unwrap();
        assert_eq!(p.main, Some(stop_td(adhoc(Strategy::Fail, "increment"))));
        assert!(p.warnings.is_empty(), "{:?}", p.warnings);
    }

    #[test]
    fn undeclared_rule_is_reported() {
        let err = nat_program("main = full_td(nosuch)").unwrap_err();
        let LoadError::Invalid(ds) = err else { panic!("expected diagnostics") };
        assert!(ds[0].message.contains("unknown name `nosuch`"), "{}", ds[0]);
        assert_eq!(ds[0].context, "main");
    }

    #[test]
    fn family_with_duplicate_sorts_is_rejected() {
        let text = "rule atEven : Nat = n -> (Succ n) where even_nat(n)\n\
                    rule atOdd : Nat = n -> (Succ n) where odd_nat(n)\n\
                    main = stop_td(family([atEven, atOdd], fail))";
        let LoadError::Invalid(ds) = nat_program(text).unwrap_err() else { panic!() };
        assert!(ds[0].message.contains("`atEven`") && ds[0].message.contains("`atOdd`"), "{}", ds[0]);
    }

    #[test]
    fn parse_errors_carry_positions() {
        let LoadError::Parse(e) = nat_program("main = id <+\n  ;").unwrap_err() else { panic!() };
        assert_eq!((e.line, e.col), (2, 3));
    }

    #[test]
    fn precedence_and_associativity() {
        let p = nat_program(INC).unwrap();
        let s = p.strategy("increment; id <+ fail; id <+ id").unwrap();
        assert_eq!(s.to_string(), "increment; id <+ fail; id <+ id");
        match s {
            Strategy::Choice(l, _) => assert!(matches!(*l, Strategy::Choice(..))),
            other => panic!("{other}"),
        }
        let s = p.strategy("rec v. all(v); increment").unwrap();
        assert_eq!(
            s,
            crate::strategy::rec("v", crate::strategy::seq(crate::strategy::all(var("v")), rule("increment")))
        );
    }

    #[test]
    fn definitions_expand_without_capture() {
        let text = format!(
            "{INC}def twice(s) = s; s\n\
             def td(s) = rec x0. s; all(x0)\n\
             main = rec x0. td(x0 <+ increment)"
        );
        let p = nat_program(&text).unwrap();
        assert!(p.warnings.iter().any(|w| w.message.contains("parameter `s` is used 2 times")));
        let main = p.main.unwrap();
        // The outer x0 must stay free in the argument after expansion.
        match &main {
            Strategy::Rec(v, body) => {
                assert_eq!(v, "x0");
                match &**body {
                    Strategy::Rec(w, inner) => {
                        assert_ne!(w, "x0");
                        assert!(inner.free_vars().contains("x0"));
                    }
                    other => panic!("{other}"),
                }
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn recursive_definitions_are_rejected() {
        let LoadError::Invalid(ds) = nat_program("def a = b\ndef b = a\nmain = a").unwrap_err() else { panic!() };
        assert!(ds.iter().any(|d| d.message.contains("expand into themselves")));
    }

    #[test]
    fn stop_bu_and_dominated_cases_warn() {
        let text = format!(
            "{INC}rule dec : Nat = (Succ n) -> n\n\
             def a = stop_bu(increment)\n\
             main = stop_td(adhoc(adhoc(fail, dec), increment))"
        );
        let p = nat_program(&text).unwrap();
        let msgs: Vec<String> = p.warnings.iter().map(|w| w.to_string()).collect();
        assert!(msgs.iter().any(|m| m.contains("stop_bu never applies")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("rec v. all(v) <+ s")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("case `dec` is dominated by `increment`")), "{msgs:?}");
    }

    #[test]
    fn composites_annotations_and_literals() {
        let sig = fixtures::company_signature();
        let text = "rule incSalary : Salary = s -> (+ s 1) @infallible @measure(Any)\n\
                    rule raise : Employee = (Employee n s) -> (Employee n (* s 2.0)) where lt(s, 50.0:Salary)\n\
                    rule both : Salary = seq(incSalary, incSalary)\n\
                    qrule salary : Salary = s => s\n\
                    main = full_td1(incSalary)\n\
                    query = full_cl(adhocq(failq, salary))";
        let p = Program::load(sig, text).unwrap();
        let r = p.rules.get("incSalary").unwrap();
        assert!(r.infallible);
        assert_eq!(r.measure, Some(vec![Rel::Any]));
        assert_eq!(r.to_string(), "rule incSalary : Salary = s -> (+ s 1.0:Salary) @infallible @measure(Any)");
        assert!(matches!(p.rules.get("both").unwrap().body, RuleBody::Seq(..)));
        assert_eq!(p.main, Some(full_td(adhoc(Strategy::Id, "incSalary"))));
        assert_eq!(p.query.unwrap().to_string(), "full_cl(adhocq(failq, salary))");
    }

    #[test]
    fn keywords_cannot_name_rules() {
        assert!(matches!(nat_program("rule all : Nat = n -> n"), Err(LoadError::Parse(_))));
    }
}
