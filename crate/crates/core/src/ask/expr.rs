//! Holomorphic expression trees: parsing, printing, exact differentiation and
//! guarded evaluation.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' integer)?
//! base   := number | 'i' | 'Z' index | 'log' '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are 1-based in text (`Z1`, `Z2`, ...) and 0-based in the tree.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Points closer than this to the principal branch cut of `log` are rejected.
pub const BRANCH_CUT_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Non-negative real literal as written in the source.
    Num(f64),
    /// The imaginary unit.
    I,
    /// Folded constant; produced by differentiation and by catalog builders.
    Const(Complex64),
    /// Holomorphic coordinate `Z^(k+1)`.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Log(Box<Expr>),
}

impl Expr {
    pub fn constant(c: Complex64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(k: usize) -> Expr {
        Expr::Var(k)
    }

    fn as_const(&self) -> Option<Complex64> {
        match self {
            Expr::Num(x) => Some(Complex64::new(*x, 0.0)),
            Expr::I => Some(Complex64::i()),
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const_eq(&self, v: f64) -> bool {
        self.as_const() == Some(Complex64::new(v, 0.0))
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::I | Expr::Const(_) => None,
            Expr::Var(k) => Some(*k),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Log(a) => a.max_var(),
        }
    }

    /// Exact derivative with respect to `Z^(k+1)`, lightly simplified.
    pub fn diff(&self, k: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::I | Expr::Const(_) => zero(),
            Expr::Var(j) => {
                if *j == k {
                    one()
                } else {
                    zero()
                }
            }
            Expr::Add(a, b) => add(a.diff(k), b.diff(k)),
            Expr::Sub(a, b) => sub(a.diff(k), b.diff(k)),
            Expr::Mul(a, b) => add(
                mul(a.diff(k), (**b).clone()),
                mul((**a).clone(), b.diff(k)),
            ),
            Expr::Div(a, b) => {
                let num = sub(
                    mul(a.diff(k), (**b).clone()),
                    mul((**a).clone(), b.diff(k)),
                );
                div(num, pow((**b).clone(), 2))
            }
            Expr::Neg(a) => neg(a.diff(k)),
            Expr::Pow(a, m) => {
                let outer = mul(
                    Expr::Const(Complex64::new(*m as f64, 0.0)),
                    pow((**a).clone(), m - 1),
                );
                mul(outer, a.diff(k))
            }
            Expr::Log(a) => div(a.diff(k), (**a).clone()),
        }
    }

    /// Evaluates at `z`, rejecting the log branch cut and division by zero.
    pub fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        match self {
            Expr::Num(x) => Ok(Complex64::new(*x, 0.0)),
            Expr::I => Ok(Complex64::i()),
            Expr::Const(c) => Ok(*c),
            Expr::Var(k) => z.get(*k).copied().ok_or_else(|| {
                Error::Dimension(format!("point has {} coordinates, need Z{}", z.len(), k + 1))
            }),
            Expr::Add(a, b) => Ok(a.eval(z)? + b.eval(z)?),
            Expr::Sub(a, b) => Ok(a.eval(z)? - b.eval(z)?),
            Expr::Mul(a, b) => Ok(a.eval(z)? * b.eval(z)?),
            Expr::Div(a, b) => {
                let den = b.eval(z)?;
                if den.norm() == 0.0 || !den.is_finite() {
                    return Err(Error::Domain("division by zero".into()));
                }
                Ok(a.eval(z)? / den)
            }
            Expr::Neg(a) => Ok(-a.eval(z)?),
            Expr::Pow(a, m) => {
                let base = a.eval(z)?;
                if *m < 0 && base.norm() == 0.0 {
                    return Err(Error::Domain("negative power of zero".into()));
                }
                Ok(base.powi(*m))
            }
            Expr::Log(a) => {
                let w = a.eval(z)?;
                let dist = if w.re <= 0.0 { w.im.abs() } else { w.norm() };
                if dist < BRANCH_CUT_GUARD {
                    return Err(Error::Domain(format!(
                        "log argument {w} lies within {BRANCH_CUT_GUARD:e} of the branch cut"
                    )));
                }
                Ok(w.ln())
            }
        }
    }
}

fn zero() -> Expr {
    Expr::Const(Complex64::new(0.0, 0.0))
}

fn one() -> Expr {
    Expr::Const(Complex64::new(1.0, 0.0))
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        _ if a.is_const_eq(0.0) => b,
        _ if b.is_const_eq(0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        _ if b.is_const_eq(0.0) => a,
        _ if a.is_const_eq(0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        _ if a.is_const_eq(0.0) || b.is_const_eq(0.0) => zero(),
        _ if a.is_const_eq(1.0) => b,
        _ if b.is_const_eq(1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y.norm() != 0.0 => Expr::Const(x / y),
        _ if a.is_const_eq(0.0) => zero(),
        _ if b.is_const_eq(1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Neg(inner) => *inner,
        other => match other.as_const() {
            Some(c) => Expr::Const(-c),
            None => Expr::Neg(Box::new(other)),
        },
    }
}

pub(crate) fn pow(a: Expr, m: i32) -> Expr {
    if m == 0 {
        return one();
    }
    if m == 1 {
        return a;
    }
    match a.as_const() {
        Some(c) if !(m < 0 && c.norm() == 0.0) => Expr::Const(c.powi(m)),
        _ => Expr::Pow(Box::new(a), m),
    }
}

pub(crate) fn log(a: Expr) -> Expr {
    Expr::Log(Box::new(a))
}

fn write_real(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x < 0.0 || (x == 0.0 && x.is_sign_negative()) {
        write!(f, "(0-{})", -x)
    } else {
        write!(f, "{x}")
    }
}

/// Canonical, fully parenthesized printer. Its output re-parses to the same
/// tree for every tree produced by [`parse`].
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write_real(f, *x),
            Expr::I => write!(f, "i"),
            Expr::Const(c) => {
                if c.im == 0.0 {
                    write_real(f, c.re)
                } else {
                    write!(f, "(")?;
                    write_real(f, c.re)?;
                    write!(f, "+")?;
                    write_real(f, c.im)?;
                    write!(f, "*i)")
                }
            }
            Expr::Var(k) => write!(f, "Z{}", k + 1),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Neg(a) => write!(f, "(0-{a})"),
            Expr::Pow(a, m) => write!(f, "({a})^{m}"),
            Expr::Log(a) => write!(f, "log({a})"),
        }
    }
}

/// Parses `text` as a holomorphic expression in `Z1..Zn`.
pub fn parse(text: &str, n: usize) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            position: 0,
            expected: "an expression".into(),
        });
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        n,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("'+', '-', '*', '/', '^' or end of input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn err(&self, expected: &str) -> Error {
        Error::Syntax {
            position: self.pos,
            expected: expected.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let m = self.integer()?;
            return Ok(Expr::Pow(Box::new(base), m));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        let mut end = self.pos;
        if matches!(self.src.get(end), Some(b'-') | Some(b'+')) {
            end += 1;
        }
        let digits_start = end;
        while end < self.src.len() && self.src[end].is_ascii_digit() {
            end += 1;
        }
        let bad_tail = matches!(self.src.get(end), Some(b'.') | Some(b'e') | Some(b'E'));
        if end == digits_start || bad_tail {
            return Err(Error::NonIntegerExponent { position: start });
        }
        let s = std::str::from_utf8(&self.src[start..end]).expect("ascii");
        let m = s
            .parse::<i32>()
            .map_err(|_| Error::NonIntegerExponent { position: start })?;
        self.pos = end;
        Ok(m)
    }

    fn base(&mut self) -> Result<Expr> {
        const EXPECTED: &str = "number, 'i', 'Z<index>', 'log(' or '('";
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'Z') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.err("variable index after 'Z'"));
                }
                let idx: usize = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("ascii")
                    .parse()
                    .map_err(|_| self.err("variable index"))?;
                if idx == 0 || idx > self.n {
                    return Err(Error::UnknownVariable {
                        index: idx,
                        n: self.n,
                    });
                }
                Ok(Expr::Var(idx - 1))
            }
            Some(b'l') if self.src[self.pos..].starts_with(b"log") => {
                self.pos += 3;
                if self.peek() != Some(b'(') {
                    return Err(self.err("'(' after 'log'"));
                }
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("')'"));
                }
                self.pos += 1;
                Ok(Expr::Log(Box::new(e)))
            }
            Some(b'i') => {
                let next = self.src.get(self.pos + 1).copied();
                if next.is_some_and(|c| c.is_ascii_alphanumeric()) {
                    return Err(self.err(EXPECTED));
                }
                self.pos += 1;
                Ok(Expr::I)
            }
            _ => Err(self.err(EXPECTED)),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        let mut end = start;
        while end < s.len() && s[end].is_ascii_digit() {
            end += 1;
        }
        if end < s.len() && s[end] == b'.' {
            end += 1;
            while end < s.len() && s[end].is_ascii_digit() {
                end += 1;
            }
        }
        if end < s.len() && (s[end] == b'e' || s[end] == b'E') {
            let mut e = end + 1;
            if e < s.len() && (s[e] == b'+' || s[e] == b'-') {
                e += 1;
            }
            let digits = e;
            while e < s.len() && s[e].is_ascii_digit() {
                e += 1;
            }
            if e > digits {
                end = e;
            }
        }
        let text = std::str::from_utf8(&s[start..end]).expect("ascii");
        let x: f64 = text.parse().map_err(|_| Error::Syntax {
            position: start,
            expected: "a number".into(),
        })?;
        self.pos = end;
        Ok(Expr::Num(x))
    }
}
