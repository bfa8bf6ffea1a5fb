//! Tokens shared by the term, pattern and program readers, and the term reader.

use std::fmt;

use crate::error::ParseError;
use crate::signature::{cons_name, nil_name, Signature};
use crate::term::{Literal, PrimOp, Term};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Semi,
    Colon,
    Dot,
    Eq,
    Arrow,
    FatArrow,
    LeftChoice,
    At,
    Op(PrimOp),
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrack => f.write_str("`[`"),
            Tok::RBrack => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::FatArrow => f.write_str("`=>`"),
            Tok::LeftChoice => f.write_str("`<+`"),
            Tok::At => f.write_str("`@`"),
            Tok::Op(op) => write!(f, "`{}`", op.symbol()),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Float(x) => write!(f, "`{x:?}`"),
            Tok::Str(s) => write!(f, "{:?}", s),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

/// Splits `text` into tokens; `#` starts a comment running to the end of the line.
pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let peek = chars.get(i + 1).copied();
        let mut adv = 1;
        let tok = match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            '.' => Tok::Dot,
            '@' => Tok::At,
            '=' if peek == Some('>') => {
                adv = 2;
                Tok::FatArrow
            }
            '=' => Tok::Eq,
            '<' if peek == Some('+') => {
                adv = 2;
                Tok::LeftChoice
            }
            '-' if peek == Some('>') => {
                adv = 2;
                Tok::Arrow
            }
            '+' => Tok::Op(PrimOp::Add),
            '*' => Tok::Op(PrimOp::Mul),
            '-' if !peek.is_some_and(|d| d.is_ascii_digit()) => Tok::Op(PrimOp::Sub),
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None | Some('\n') => {
                            return Err(ParseError::new(start.0, start.1, "unterminated string literal"))
                        }
                        Some('"') => break,
                        Some('\\') => {
                            let e = match chars.get(j + 1) {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('"') => '"',
                                Some('\\') => '\\',
                                _ => return Err(ParseError::new(line, col + (j - i), "invalid escape sequence")),
                            };
                            s.push(e);
                            j += 2;
                        }
                        Some(&c) => {
                            s.push(c);
                            j += 1;
                        }
                    }
                }
                adv = j + 1 - i;
                Tok::Str(s)
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let mut float = false;
                if chars.get(j) == Some(&'.') && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                    float = true;
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if matches!(chars.get(j), Some('e' | 'E')) {
                    let mut k = j + 1;
                    if matches!(chars.get(k), Some('+' | '-')) {
                        k += 1;
                    }
                    if chars.get(k).is_some_and(|d| d.is_ascii_digit()) {
                        float = true;
                        j = k;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let s: String = chars[i..j].iter().collect();
                adv = j - i;
                if float {
                    Tok::Float(s.parse().map_err(|_| ParseError::new(start.0, start.1, format!("bad number `{s}`")))?)
                } else {
                    Tok::Int(s.parse().map_err(|_| ParseError::new(start.0, start.1, format!("bad number `{s}`")))?)
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '\'') {
                    j += 1;
                }
                adv = j - i;
                Tok::Ident(chars[i..j].iter().collect())
            }
            c => return Err(ParseError::new(start.0, start.1, format!("unexpected character `{c}`"))),
        };
        out.push(Token { tok, line: start.0, col: start.1 });
        i += adv;
        col += adv;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Cursor over a token vector.
pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    pub fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn error(&self, msg: impl Into<String>) -> ParseError {
        let t = self.here();
        ParseError::new(t.line, t.col, msg)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &Tok) -> Result<Token, ParseError> {
        if self.peek() == tok {
            Ok(self.next())
        } else {
            Err(self.error(format!("expected {tok}, found {}", self.peek())))
        }
    }

    /// After a list element: `true` on the closing token, `false` on a comma.
    pub fn list_sep(&mut self, close: &Tok) -> Result<bool, ParseError> {
        if self.eat(close) {
            Ok(true)
        } else if self.eat(&Tok::Comma) {
            Ok(false)
        } else {
            Err(self.error(format!("expected `,` or {close}, found {}", self.peek())))
        }
    }

    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected an identifier, found {other}"))),
        }
    }
}

fn literal_of(tok: &Tok) -> Option<Literal> {
    match tok {
        Tok::Int(i) => Some(Literal::Int(*i)),
        Tok::Float(x) => Some(Literal::Float(*x)),
        Tok::Str(s) => Some(Literal::Str(s.as_str().into())),
        _ => None,
    }
}

/// Reads a literal with an optional `:Sort` suffix. Without a suffix the sort comes
/// from `expected`; an integer literal written for a float sort is widened.
pub(crate) fn read_literal(
    cur: &mut Cursor,
    sig: Option<&Signature>,
    expected: Option<&str>,
) -> Result<(Literal, String), ParseError> {
    let at = cur.here().clone();
    let lit = literal_of(&at.tok).ok_or_else(|| cur.error(format!("expected a literal, found {}", at.tok)))?;
    cur.next();
    let sort = if cur.eat(&Tok::Colon) {
        cur.ident()?
    } else {
        match (sig, expected) {
            (Some(sig), Some(exp)) if sig.is_prim(exp) => exp.to_string(),
            _ => return Err(ParseError::new(at.line, at.col, format!("literal {lit} needs a `:Sort` annotation"))),
        }
    };
    let lit = match (lit, sig.and_then(|s| s.prim_kind(&sort))) {
        (Literal::Int(i), Some(crate::term::PrimKind::Float)) => Literal::Float(i as f64),
        (lit, _) => lit,
    };
    Ok((lit, sort))
}

enum Frame {
    Node { constr: String, arg_sorts: Option<Vec<String>>, children: Vec<Term> },
    List { elem: String, items: Vec<Term> },
}

impl Frame {
    fn expected(&self) -> Option<String> {
        match self {
            Frame::Node { arg_sorts, children, .. } => arg_sorts.as_ref().and_then(|a| a.get(children.len()).cloned()),
            Frame::List { elem, .. } => Some(elem.clone()),
        }
    }

    fn push(&mut self, t: Term) {
        match self {
            Frame::Node { children, .. } => children.push(t),
            Frame::List { items, .. } => items.push(t),
        }
    }
}

fn build_list(elem: &str, items: Vec<Term>) -> Term {
    let mut acc = Term::constant(nil_name(elem));
    for t in items.into_iter().rev() {
        acc = Term::node(cons_name(elem), vec![t, acc]);
    }
    acc
}

/// Reads one term. With a signature, literal sorts may be omitted where the enclosing
/// constructor fixes them, and `[a, b, …]` abbreviates a `Cons_X`/`Nil_X` chain.
/// Parsing is iterative, so nesting depth is limited only by memory.
pub(crate) fn read_term(cur: &mut Cursor, sig: Option<&Signature>, root_sort: Option<&str>) -> Result<Term, ParseError> {
    let mut stack: Vec<Frame> = Vec::new();
    loop {
        let expected = match stack.last() {
            Some(f) => f.expected(),
            None => root_sort.map(str::to_string),
        };
        let at = cur.here().clone();
        let mut done: Option<Term> = None;
        match &at.tok {
            Tok::LParen => {
                cur.next();
                let constr = cur.ident()?;
                let arg_sorts = sig.and_then(|s| s.symbol(&constr)).map(|s| s.arg_sorts.clone());
                stack.push(Frame::Node { constr, arg_sorts, children: Vec::new() });
            }
            Tok::LBrack => {
                cur.next();
                let elem = expected
                    .as_deref()
                    .and_then(|e| e.strip_prefix('[').and_then(|r| r.strip_suffix(']')))
                    .map(str::to_string)
                    .ok_or_else(|| {
                        ParseError::new(at.line, at.col, "list syntax needs a list sort from the enclosing constructor")
                    })?;
                stack.push(Frame::List { elem, items: Vec::new() });
            }
            Tok::Ident(c) => {
                cur.next();
                done = Some(Term::constant(c.as_str()));
            }
            Tok::Int(_) | Tok::Float(_) | Tok::Str(_) => {
                let (lit, sort) = read_literal(cur, sig, expected.as_deref())?;
                done = Some(Term::lit(lit, sort));
            }
            other => return Err(cur.error(format!("expected a term, found {other}"))),
        }
        // Close as many frames as the input allows.
        loop {
            if let Some(t) = done.take() {
                match stack.last_mut() {
                    None => return Ok(t),
                    Some(f) => {
                        f.push(t);
                        if matches!(f, Frame::List { .. })
                            && !matches!(cur.peek(), Tok::RBrack)
                            && !cur.eat(&Tok::Comma)
                        {
                            return Err(cur.error(format!("expected `,` or `]`, found {}", cur.peek())));
                        }
                    }
                }
            }
            let closes = match stack.last() {
                Some(Frame::Node { .. }) => cur.peek() == &Tok::RParen,
                Some(Frame::List { .. }) => cur.peek() == &Tok::RBrack,
                None => false,
            };
            if !closes {
                break;
            }
            cur.next();
            done = Some(match stack.pop() {
                Some(Frame::Node { constr, children, .. }) => Term::node(constr, children),
                Some(Frame::List { elem, items }) => build_list(&elem, items),
                None => unreachable!(),
            });
        }
    }
}

/// Parses a whole term file.
pub fn parse_term(text: &str, sig: Option<&Signature>) -> Result<Term, ParseError> {
    let mut cur = Cursor::new(lex(text)?);
    let t = read_term(&mut cur, sig, None)?;
    if !cur.at_eof() {
        return Err(cur.error(format!("unexpected {} after the term", cur.peek())));
    }
    Ok(t)
}
