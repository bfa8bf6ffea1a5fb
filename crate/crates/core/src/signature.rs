//! Many-sorted signatures and term validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::error::ParseError;
use crate::term::{PrimKind, Term, TermKind};

pub type Sort = String;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub constr: String,
    pub arg_sorts: Vec<Sort>,
    pub result_sort: Sort,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :", self.constr)?;
        if !self.arg_sorts.is_empty() {
            write!(f, " {}", self.arg_sorts.join(" * "))?;
        }
        write!(f, " -> {}", self.result_sort)
    }
}

/// Sort name used for lists of `elem`.
pub fn list_sort(elem: &str) -> Sort {
    format!("[{elem}]")
}

pub fn cons_name(elem: &str) -> String {
    format!("Cons_{elem}")
}

pub fn nil_name(elem: &str) -> String {
    format!("Nil_{elem}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("duplicate sort `{0}`")]
    DuplicateSort(Sort),
    #[error("duplicate constructor `{0}`")]
    DuplicateConstructor(String),
    #[error("constructor `{constr}` mentions undeclared sort `{sort}`")]
    UndeclaredSort { constr: String, sort: Sort },
    #[error("primitive sort `{0}` cannot be the result of a constructor")]
    ConstructorOfPrimitive(Sort),
    #[error("unknown sort `{0}`")]
    UnknownSort(Sort),
}

/// Validation failure, located by the child-index path from the root.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at {}: {message}", render_path(.path))]
pub struct TermDiagnostic {
    pub path: Vec<usize>,
    pub message: String,
}

fn render_path(path: &[usize]) -> String {
    if path.is_empty() {
        "root".to_string()
    } else {
        let parts: Vec<String> = path.iter().map(|i| i.to_string()).collect();
        format!("root/{}", parts.join("/"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    sorts: BTreeSet<Sort>,
    symbols: BTreeMap<String, Symbol>,
    prims: BTreeMap<Sort, PrimKind>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sort(&mut self, sort: impl Into<Sort>) -> Result<(), SignatureError> {
        let sort = sort.into();
        if !self.sorts.insert(sort.clone()) {
            return Err(SignatureError::DuplicateSort(sort));
        }
        Ok(())
    }

    pub fn add_prim(&mut self, sort: impl Into<Sort>, kind: PrimKind) -> Result<(), SignatureError> {
        let sort = sort.into();
        self.add_sort(sort.clone())?;
        self.prims.insert(sort, kind);
        Ok(())
    }

    /// Declares `[elem]` together with its `Cons_elem` / `Nil_elem` constructors.
    pub fn add_list(&mut self, elem: &str) -> Result<(), SignatureError> {
        let ls = list_sort(elem);
        self.add_sort(ls.clone())?;
        self.add_symbol(cons_name(elem), vec![elem.to_string(), ls.clone()], ls.clone())?;
        self.add_symbol(nil_name(elem), Vec::new(), ls)
    }

    /// Adds a constructor. Sorts are checked by [`Signature::check`], so declarations may
    /// appear in any order.
    pub fn add_symbol(
        &mut self,
        constr: impl Into<String>,
        arg_sorts: Vec<Sort>,
        result_sort: impl Into<Sort>,
    ) -> Result<(), SignatureError> {
        let constr = constr.into();
        if self.symbols.contains_key(&constr) {
            return Err(SignatureError::DuplicateConstructor(constr));
        }
        let sym = Symbol { constr: constr.clone(), arg_sorts, result_sort: result_sort.into() };
        self.symbols.insert(constr, sym);
        Ok(())
    }

    /// Checks that symbols only mention declared sorts and never build primitives.
    pub fn check(&self) -> Result<(), SignatureError> {
        for sym in self.symbols.values() {
            for s in sym.arg_sorts.iter().chain(std::iter::once(&sym.result_sort)) {
                if !self.sorts.contains(s) {
                    return Err(SignatureError::UndeclaredSort { constr: sym.constr.clone(), sort: s.clone() });
                }
            }
            if self.prims.contains_key(&sym.result_sort) {
                return Err(SignatureError::ConstructorOfPrimitive(sym.result_sort.clone()));
            }
        }
        Ok(())
    }

    pub fn sorts(&self) -> &BTreeSet<Sort> {
        &self.sorts
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.values()
    }

    pub fn symbol(&self, constr: &str) -> Option<&Symbol> {
        self.symbols.get(constr)
    }

    pub fn has_sort(&self, sort: &str) -> bool {
        self.sorts.contains(sort)
    }

    pub fn prim_kind(&self, sort: &str) -> Option<PrimKind> {
        self.prims.get(sort).copied()
    }

    pub fn prim_sorts(&self) -> &BTreeMap<Sort, PrimKind> {
        &self.prims
    }

    pub fn is_prim(&self, sort: &str) -> bool {
        self.prims.contains_key(sort)
    }

    /// Constructors whose result sort is `sort`.
    pub fn symbols_of_sort<'a>(&'a self, sort: &'a str) -> impl Iterator<Item = &'a Symbol> + 'a {
        self.symbols.values().filter(move |s| s.result_sort == sort)
    }

    /// Sorts of immediate subterms over all terms of sort `sort`.
    pub fn arg_sorts_of_sort(&self, sort: &str) -> Result<BTreeSet<Sort>, SignatureError> {
        if !self.sorts.contains(sort) {
            return Err(SignatureError::UnknownSort(sort.to_string()));
        }
        Ok(self.symbols_of_sort(sort).flat_map(|s| s.arg_sorts.iter().cloned()).collect())
    }

    /// Result sort of the root constructor, or the literal's own sort.
    pub fn sort_of<'a>(&'a self, t: &'a Term) -> Result<&'a str, TermDiagnostic> {
        match t.kind() {
            TermKind::Node { constr, .. } => self
                .symbols
                .get(&**constr)
                .map(|s| s.result_sort.as_str())
                .ok_or_else(|| TermDiagnostic { path: Vec::new(), message: format!("unknown constructor `{constr}`") }),
            TermKind::Lit { sort, .. } => Ok(sort),
        }
    }

    /// Checks arities, child sorts and literal kinds throughout `t`.
    pub fn validate_term(&self, t: &Term) -> Result<(), TermDiagnostic> {
        self.validate_term_at(t, None)
    }

    /// Like [`Signature::validate_term`], additionally requiring the root to have sort `expected`.
    pub fn validate_term_at(&self, t: &Term, expected: Option<&str>) -> Result<(), TermDiagnostic> {
        let mut stack: Vec<(&Term, Vec<usize>, Option<&str>)> = vec![(t, Vec::new(), expected)];
        while let Some((t, path, expected)) = stack.pop() {
            let err = |message: String| TermDiagnostic { path: path.clone(), message };
            let actual = match t.kind() {
                TermKind::Node { constr, children } => {
                    let sym = self
                        .symbols
                        .get(&**constr)
                        .ok_or_else(|| err(format!("unknown constructor `{constr}`")))?;
                    if sym.arg_sorts.len() != children.len() {
                        return Err(err(format!(
                            "constructor `{constr}` expects {} argument(s), found {}",
                            sym.arg_sorts.len(),
                            children.len()
                        )));
                    }
                    for (i, (c, s)) in children.iter().zip(sym.arg_sorts.iter()).enumerate() {
                        let mut p = path.clone();
                        p.push(i);
                        stack.push((c, p, Some(s.as_str())));
                    }
                    sym.result_sort.as_str()
                }
                TermKind::Lit { value, sort } => {
                    let kind = self
                        .prim_kind(sort)
                        .ok_or_else(|| err(format!("`{sort}` is not a primitive sort")))?;
                    if kind != value.kind() {
                        return Err(err(format!("literal {value} is not of kind {kind} required by `{sort}`")));
                    }
                    sort
                }
            };
            if let Some(exp) = expected {
                if exp != actual {
                    return Err(err(format!("expected a term of sort `{exp}`, found sort `{actual}`")));
                }
            }
        }
        Ok(())
    }

    /// Minimal term depth per inhabited sort; primitives have depth 1.
    pub fn min_depths(&self) -> BTreeMap<Sort, usize> {
        let mut best: BTreeMap<Sort, usize> = self.prims.keys().map(|s| (s.clone(), 1)).collect();
        loop {
            let mut changed = false;
            for sym in self.symbols.values() {
                let d = sym
                    .arg_sorts
                    .iter()
                    .map(|s| best.get(s).copied())
                    .try_fold(0usize, |acc, d| d.map(|d| acc.max(d)));
                if let Some(d) = d {
                    let d = d + 1;
                    let e = best.entry(sym.result_sort.clone()).or_insert(usize::MAX);
                    if d < *e {
                        *e = d;
                        changed = true;
                    }
                }
            }
            if !changed {
                return best;
            }
        }
    }

    /// Parses the line-oriented signature format.
    pub fn parse(text: &str) -> Result<Signature, ParseError> {
        let mut sig = Signature::new();
        let mut first_use: BTreeMap<String, usize> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let col = raw.find(|c: char| !c.is_whitespace()).map_or(1, |c| c + 1);
            let perr = |m: String| ParseError::new(line_no, col, m);
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[0] {
                "sort" => {
                    let [_, name] = words[..] else {
                        return Err(perr("expected `sort <Name>`".into()));
                    };
                    check_ident(name).map_err(&perr)?;
                    sig.add_sort(name).map_err(|e| perr(e.to_string()))?;
                }
                "prim" => {
                    let [_, name, ":", kind] = words[..] else {
                        return Err(perr("expected `prim <Name> : <int|float|string>`".into()));
                    };
                    check_ident(name).map_err(&perr)?;
                    let kind = PrimKind::parse(kind).ok_or_else(|| perr(format!("unknown primitive kind `{kind}`")))?;
                    sig.add_prim(name, kind).map_err(|e| perr(e.to_string()))?;
                }
                "list" => {
                    let [_, elem] = words[..] else {
                        return Err(perr("expected `list <Sort>`".into()));
                    };
                    check_ident(elem).map_err(&perr)?;
                    sig.add_list(elem).map_err(|e| perr(e.to_string()))?;
                    first_use.entry(elem.to_string()).or_insert(line_no);
                }
                _ => {
                    let (constr, rest) = line
                        .split_once(':')
                        .ok_or_else(|| perr(format!("unrecognised declaration `{line}`")))?;
                    let constr = constr.trim();
                    check_ident(constr).map_err(&perr)?;
                    let (args, result) = rest
                        .split_once("->")
                        .ok_or_else(|| perr("constructor declaration needs `->`".into()))?;
                    let result = result.trim();
                    check_sort_name(result).map_err(&perr)?;
                    let args = args.trim();
                    let arg_sorts: Vec<Sort> = if args.is_empty() {
                        Vec::new()
                    } else {
                        args.split('*').map(|a| a.trim().to_string()).collect()
                    };
                    for a in &arg_sorts {
                        check_sort_name(a).map_err(&perr)?;
                        first_use.entry(a.clone()).or_insert(line_no);
                    }
                    first_use.entry(result.to_string()).or_insert(line_no);
                    sig.add_symbol(constr, arg_sorts, result).map_err(|e| perr(e.to_string()))?;
                }
            }
        }
        for (sort, line) in &first_use {
            if !sig.has_sort(sort) {
                return Err(ParseError::new(*line, 1, format!("undeclared sort `{sort}`")));
            }
        }
        sig.check().map_err(|e| ParseError::new(1, 1, e.to_string()))?;
        Ok(sig)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sorts {
            match self.prims.get(s) {
                Some(k) => writeln!(f, "prim {s} : {k}")?,
                None => writeln!(f, "sort {s}")?,
            }
        }
        for sym in self.symbols.values() {
            writeln!(f, "{sym}")?;
        }
        Ok(())
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

fn check_ident(s: &str) -> Result<(), String> {
    if is_ident(s) {
        Ok(())
    } else {
        Err(format!("`{s}` is not a valid identifier"))
    }
}

fn check_sort_name(s: &str) -> Result<(), String> {
    match s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        Some(inner) => check_ident(inner),
        None => check_ident(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::term::Literal;

    fn company() -> Signature {
        fixtures::company_signature()
    }

    #[test]
    fn parses_company_signature() {
        let sig = company();
        assert!(sig.has_sort("[Unit]"));
        assert_eq!(sig.symbol("Cons_Unit").unwrap().arg_sorts, vec!["Unit".to_string(), "[Unit]".to_string()]);
        assert_eq!(sig.prim_kind("Salary"), Some(PrimKind::Float));
    }

    #[test]
    fn arg_sorts_examples() {
        let sig = company();
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(sig.arg_sorts_of_sort("Manager").unwrap(), set(&["Employee"]));
        assert_eq!(sig.arg_sorts_of_sort("Salary").unwrap(), set(&[]));
        assert_eq!(sig.arg_sorts_of_sort("Unit").unwrap(), set(&["Employee", "Department"]));
        assert!(matches!(sig.arg_sorts_of_sort("Nope"), Err(SignatureError::UnknownSort(_))));
    }

    #[test]
    fn validate_examples() {
        let sig = company();
        let err = sig.validate_term(&Term::constant("Zero")).unwrap_err();
        assert!(err.message.contains("unknown constructor"));

        let nat = fixtures::nat_tree_signature();
        assert!(nat.validate_term(&Term::node("Succ", vec![Term::constant("Zero")])).is_ok());

        let emp = Term::node("Employee", vec![Term::lit(Literal::Str("a".into()), "Name")]);
        let err = sig.validate_term(&emp).unwrap_err();
        assert!(err.message.contains("expects 2 argument(s)"), "{err}");
    }

    #[test]
    fn validate_reports_the_offending_path() {
        let sig = company();
        let bad = Term::node(
            "Manager",
            vec![Term::node(
                "Employee",
                vec![Term::lit(Literal::Str("m".into()), "Name"), Term::lit(Literal::Int(3), "Salary")],
            )],
        );
        let err = sig.validate_term(&bad).unwrap_err();
        assert_eq!(err.path, vec![0, 1]);
        assert_eq!(err.to_string(), "at root/0/1: literal 3 is not of kind float required by `Salary`");
    }

    #[test]
    fn sort_of_examples() {
        let sig = company();
        let emp = Term::node(
            "Employee",
            vec![Term::lit(Literal::Str("a".into()), "Name"), Term::lit(Literal::Float(1.0), "Salary")],
        );
        assert_eq!(sig.sort_of(&emp).unwrap(), "Employee");
        assert_eq!(sig.sort_of(&Term::lit(Literal::Float(3.5), "Salary")).unwrap(), "Salary");
        assert_eq!(sig.sort_of(&Term::node("Manager", vec![emp])).unwrap(), "Manager");
        assert!(sig.sort_of(&Term::constant("Zero")).is_err());
    }

    #[test]
    fn rejects_undeclared_sorts_and_prim_constructors() {
        let err = Signature::parse("sort A\nF : B -> A\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("undeclared sort `B`"));
        assert!(Signature::parse("prim P : int\nMk : -> P\n").is_err());
        assert!(Signature::parse("sort A\nsort A\n").is_err());
        assert!(Signature::parse("sort A\nF : -> A\nF : -> A\n").is_err());
    }

    #[test]
    fn min_depths_follow_constants() {
        let sig = fixtures::nat_tree_signature();
        let d = sig.min_depths();
        assert_eq!(d["Nat"], 1);
        assert_eq!(d["NatTree"], 2);
    }
}
