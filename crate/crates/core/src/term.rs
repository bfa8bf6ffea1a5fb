//! Terms, literal leaves, patterns and substitutions.
//!
//! Terms are immutable rose trees shared through [`Arc`], so cloning is cheap and
//! rebuilding a node during a traversal only allocates the spine that changed.
//! Every recursive operation here is either iterative or runs with stack
//! headroom, so terms nested hundreds of thousands of levels deep are fine.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Red zone and segment size used whenever we recurse over user data.
pub(crate) const STACK_RED_ZONE: usize = 128 * 1024;
pub(crate) const STACK_SEGMENT: usize = 4 * 1024 * 1024;

#[inline]
pub(crate) fn with_stack<R>(f: impl FnOnce() -> R) -> R {
    stacker::maybe_grow(STACK_RED_ZONE, STACK_SEGMENT, f)
}

/// Payload of a primitive leaf.
#[derive(Debug, Clone)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Str(Arc<str>),
}

impl Literal {
    pub fn kind(&self) -> PrimKind {
        match self {
            Literal::Int(_) => PrimKind::Int,
            Literal::Float(_) => PrimKind::Float,
            Literal::Str(_) => PrimKind::Str,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Int(i) => Some(*i as f64),
            Literal::Float(f) => Some(*f),
            Literal::Str(_) => None,
        }
    }
}

// Floats compare bitwise: structural equality, not IEEE equality.
impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Literal::Int(a), Literal::Int(b)) => a == b,
            (Literal::Float(a), Literal::Float(b)) => a.to_bits() == b.to_bits(),
            (Literal::Str(a), Literal::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Literal {}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

/// Kind of a primitive sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimKind {
    Int,
    Float,
    Str,
}

impl PrimKind {
    pub fn parse(s: &str) -> Option<PrimKind> {
        match s {
            "int" => Some(PrimKind::Int),
            "float" => Some(PrimKind::Float),
            "string" => Some(PrimKind::Str),
            _ => None,
        }
    }
}

impl fmt::Display for PrimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrimKind::Int => "int",
            PrimKind::Float => "float",
            PrimKind::Str => "string",
        })
    }
}

#[derive(Debug)]
pub enum TermKind {
    Node { constr: Arc<str>, children: Vec<Term> },
    Lit { value: Literal, sort: Arc<str> },
}

/// A finite, fully defined term.
#[derive(Clone)]
pub struct Term(Arc<TermKind>);

impl Term {
    pub fn node(constr: impl Into<Arc<str>>, children: Vec<Term>) -> Term {
        Term(Arc::new(TermKind::Node { constr: constr.into(), children }))
    }

    pub fn constant(constr: impl Into<Arc<str>>) -> Term {
        Term::node(constr, Vec::new())
    }

    pub fn lit(value: Literal, sort: impl Into<Arc<str>>) -> Term {
        Term(Arc::new(TermKind::Lit { value, sort: sort.into() }))
    }

    pub fn kind(&self) -> &TermKind {
        &self.0
    }

    /// Constructor name, `None` for literal leaves.
    pub fn constr(&self) -> Option<&str> {
        match &*self.0 {
            TermKind::Node { constr, .. } => Some(constr),
            TermKind::Lit { .. } => None,
        }
    }

    pub fn children(&self) -> &[Term] {
        match &*self.0 {
            TermKind::Node { children, .. } => children,
            TermKind::Lit { .. } => &[],
        }
    }

    /// A term without immediate subterms (nullary node or literal).
    pub fn is_constant(&self) -> bool {
        self.children().is_empty()
    }

    /// Same root, new children. Literals are returned unchanged.
    pub fn with_children(&self, children: Vec<Term>) -> Term {
        match &*self.0 {
            TermKind::Node { constr, .. } => Term(Arc::new(TermKind::Node {
                constr: constr.clone(),
                children,
            })),
            TermKind::Lit { .. } => self.clone(),
        }
    }

    pub fn ptr_eq(&self, other: &Term) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// 1 for leaves, 1 + the deepest child otherwise.
    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self, 1usize)];
        while let Some((t, d)) = stack.pop() {
            best = best.max(d);
            stack.extend(t.children().iter().map(|c| (c, d + 1)));
        }
        best
    }

    /// Number of nodes built with constructor `constr`.
    pub fn count(&self, constr: &str) -> usize {
        self.preorder().filter(|t| t.constr() == Some(constr)).count()
    }

    /// Total number of nodes and literals.
    pub fn size(&self) -> usize {
        self.preorder().count()
    }

    /// Preorder walk: node first, then children left to right.
    pub fn preorder(&self) -> Preorder<'_> {
        Preorder { stack: vec![self] }
    }
}

pub struct Preorder<'a> {
    stack: Vec<&'a Term>,
}

impl<'a> Iterator for Preorder<'a> {
    type Item = &'a Term;

    fn next(&mut self) -> Option<&'a Term> {
        let t = self.stack.pop()?;
        self.stack.extend(t.children().iter().rev());
        Some(t)
    }
}

impl Drop for Term {
    fn drop(&mut self) {
        // Unlink uniquely owned children iteratively so that deep terms do not
        // blow the stack through recursive destructors.
        let Some(TermKind::Node { children, .. }) = Arc::get_mut(&mut self.0) else {
            return;
        };
        if children.is_empty() {
            return;
        }
        let mut pending = std::mem::take(children);
        while let Some(mut t) = pending.pop() {
            if let Some(TermKind::Node { children, .. }) = Arc::get_mut(&mut t.0) {
                pending.append(children);
            }
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        let mut stack = vec![(self, other)];
        while let Some((a, b)) = stack.pop() {
            if a.ptr_eq(b) {
                continue;
            }
            match (&*a.0, &*b.0) {
                (
                    TermKind::Node { constr: c1, children: k1 },
                    TermKind::Node { constr: c2, children: k2 },
                ) => {
                    if c1 != c2 || k1.len() != k2.len() {
                        return false;
                    }
                    stack.extend(k1.iter().zip(k2.iter()));
                }
                (TermKind::Lit { value: v1, sort: s1 }, TermKind::Lit { value: v2, sort: s2 }) => {
                    if v1 != v2 || s1 != s2 {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }
}

impl Eq for Term {}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        with_stack(|| match &*self.0 {
            TermKind::Lit { value, sort } => write!(f, "{value}:{sort}"),
            TermKind::Node { constr, children } if children.is_empty() => f.write_str(constr),
            TermKind::Node { constr, children } => {
                write!(f, "({constr}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        })
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Arithmetic usable on the right-hand side of a rule over literal leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
}

impl PrimOp {
    pub fn parse(s: &str) -> Option<PrimOp> {
        match s {
            "+" => Some(PrimOp::Add),
            "-" => Some(PrimOp::Sub),
            "*" => Some(PrimOp::Mul),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PrimOp::Add => "+",
            PrimOp::Sub => "-",
            PrimOp::Mul => "*",
        }
    }

    fn apply(self, a: &Literal, b: &Literal) -> Result<Literal, TermError> {
        let bad = || TermError::PrimOp(format!("cannot apply `{}` to {a} and {b}", self.symbol()));
        match (a, b) {
            (Literal::Int(x), Literal::Int(y)) => {
                let r = match self {
                    PrimOp::Add => x.checked_add(*y),
                    PrimOp::Sub => x.checked_sub(*y),
                    PrimOp::Mul => x.checked_mul(*y),
                };
                r.map(Literal::Int).ok_or_else(bad)
            }
            (Literal::Float(x), other) => {
                let y = other.as_f64().ok_or_else(bad)?;
                Ok(Literal::Float(match self {
                    PrimOp::Add => x + y,
                    PrimOp::Sub => x - y,
                    PrimOp::Mul => x * y,
                }))
            }
            _ => Err(bad()),
        }
    }
}

/// Rule-side term with variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Var(String),
    Node(String, Vec<Pattern>),
    Lit(Literal, String),
    /// Right-hand side only: evaluates to a literal whose sort is that of the first operand.
    Op(PrimOp, Vec<Pattern>),
}

impl Pattern {
    pub fn var(name: impl Into<String>) -> Pattern {
        Pattern::Var(name.into())
    }

    pub fn node(constr: impl Into<String>, children: Vec<Pattern>) -> Pattern {
        Pattern::Node(constr.into(), children)
    }

    pub fn constant(constr: impl Into<String>) -> Pattern {
        Pattern::Node(constr.into(), Vec::new())
    }

    /// Variables in left-to-right order, with repetitions.
    pub fn var_occurrences(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_vars(0, &mut |name, _| out.push(name));
        out
    }

    /// Calls `f(name, position_depth)` for every variable occurrence; the root is at 0.
    pub fn visit_vars<'a>(&'a self, depth: usize, f: &mut impl FnMut(&'a str, usize)) {
        match self {
            Pattern::Var(v) => f(v, depth),
            Pattern::Node(_, ps) | Pattern::Op(_, ps) => {
                for p in ps {
                    p.visit_vars(depth + 1, f);
                }
            }
            Pattern::Lit(..) => {}
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Pattern::Var(_))
    }

    pub fn contains_op(&self) -> bool {
        match self {
            Pattern::Op(..) => true,
            Pattern::Node(_, ps) => ps.iter().any(Pattern::contains_op),
            _ => false,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(v) => f.write_str(v),
            Pattern::Lit(value, sort) => write!(f, "{value}:{sort}"),
            Pattern::Node(c, ps) if ps.is_empty() => f.write_str(c),
            Pattern::Node(c, ps) => {
                write!(f, "({c}")?;
                for p in ps {
                    write!(f, " {p}")?;
                }
                f.write_str(")")
            }
            Pattern::Op(op, ps) => {
                write!(f, "({}", op.symbol())?;
                for p in ps {
                    write!(f, " {p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Finite map from pattern variables to terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitution(BTreeMap<String, Term>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: impl Into<String>, t: Term) -> Option<Term> {
        self.0.insert(var.into(), t)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }
}

impl FromIterator<(String, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Substitution(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("unbound pattern variable `{0}`")]
    UnboundVariable(String),
    #[error("{0}")]
    PrimOp(String),
}

/// Matches `p` against `t`. Repeated variables must bind structurally equal terms.
pub fn match_pattern(p: &Pattern, t: &Term) -> Option<Substitution> {
    let mut theta = Substitution::new();
    let mut stack = vec![(p, t)];
    while let Some((p, t)) = stack.pop() {
        match (p, t.kind()) {
            (Pattern::Var(v), _) => match theta.get(v) {
                Some(bound) if bound != t => return None,
                Some(_) => {}
                None => {
                    theta.insert(v.clone(), t.clone());
                }
            },
            (Pattern::Node(c, ps), TermKind::Node { constr, children }) => {
                if **constr != **c || ps.len() != children.len() {
                    return None;
                }
                stack.extend(ps.iter().zip(children.iter()));
            }
            (Pattern::Lit(v, s), TermKind::Lit { value, sort }) => {
                if v != value || **s != **sort {
                    return None;
                }
            }
            _ => return None,
        }
    }
    Some(theta)
}

/// Replaces every variable of `p` by its binding and evaluates arithmetic.
pub fn instantiate(p: &Pattern, theta: &Substitution) -> Result<Term, TermError> {
    match p {
        Pattern::Var(v) => theta.get(v).cloned().ok_or_else(|| TermError::UnboundVariable(v.clone())),
        Pattern::Node(c, ps) => {
            let children = ps.iter().map(|q| instantiate(q, theta)).collect::<Result<Vec<_>, _>>()?;
            Ok(Term::node(c.as_str(), children))
        }
        Pattern::Lit(v, s) => Ok(Term::lit(v.clone(), s.as_str())),
        Pattern::Op(op, ps) => {
            let args = ps.iter().map(|q| instantiate(q, theta)).collect::<Result<Vec<_>, _>>()?;
            let mut lits = args.iter().map(|t| match t.kind() {
                TermKind::Lit { value, sort } => Ok((value, sort)),
                TermKind::Node { .. } => {
                    Err(TermError::PrimOp(format!("`{}` expects literal operands, got {t}", op.symbol())))
                }
            });
            let (first, sort) = lits
                .next()
                .ok_or_else(|| TermError::PrimOp(format!("`{}` needs operands", op.symbol())))??;
            let mut acc = first.clone();
            for lit in lits {
                acc = op.apply(&acc, lit?.0)?;
            }
            Ok(Term::lit(acc, sort.clone()))
        }
    }
}
