//! Arithmetic expressions used for rate laws.
//!
//! An [`Expr`] is a small tree over real constants, named symbols, negation,
//! the five binary operators `+ - * / ^` and the functions `exp`, `log`,
//! `sqrt` and `pow`. `pow(a, b)` is accepted as a spelling of `a ^ b` and
//! parses to the same node.
//!
//! Precedence, tightest first: `^` (right associative), unary `-`, `* /`,
//! `+ -`. A minus sign written directly in front of a numeric literal folds
//! into the constant, so `-2*x` is `Mul(Const(-2), Sym(x))`, while `-2^2` is
//! `Neg(Pow(2, 2))`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Sym(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        /// 1-based byte offset into the input.
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("pow({0}, {1}) is undefined")]
    PowDomain(f64, f64),
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let lit = &text[i..j];
                let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    offset: start + 1,
                    expected: vec!["number"],
                    found: format!("`{lit}`"),
                })?;
                out.push((Tok::Num(v), start));
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                out.push((Tok::Ident(text[i..j].to_string()), start));
                i = j;
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start + 1,
                    expected: vec!["expression"],
                    found: format!("`{ch}`"),
                });
            }
        }
        i += 1;
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1 + 1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: Vec<&'static str>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset(),
            expected,
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(vec![name])
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            if let Tok::Num(v) = *self.peek() {
                if *self.peek_at(1) != Tok::Caret {
                    self.bump();
                    return Ok(Expr::Const(-v));
                }
            }
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Ok(Expr::Sym(name));
                }
                self.bump();
                let call = match name.as_str() {
                    "exp" => Expr::Call(Func::Exp, Box::new(self.expr()?)),
                    "log" => Expr::Call(Func::Log, Box::new(self.expr()?)),
                    "sqrt" => Expr::Call(Func::Sqrt, Box::new(self.expr()?)),
                    "pow" => {
                        let base = self.expr()?;
                        self.expect(Tok::Comma, "`,`")?;
                        let exponent = self.expr()?;
                        Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent))
                    }
                    _ => return Err(ParseError::UnknownFunction { name, offset: at }),
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(call)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => self.fail(vec!["number", "identifier", "`(`", "`-`"]),
        }
    }
}

/// Parses a complete expression; trailing input is a syntax error.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        let expected = vec!["operator", "end of input"];
        return p.fail(expected);
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

// ---------------------------------------------------------------------------
// Printing

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if c.is_sign_negative() => PREC_NEG,
        Expr::Const(_) | Expr::Sym(_) | Expr::Call(..) => PREC_ATOM,
        Expr::Neg(_) => PREC_NEG,
        Expr::Binary(op, ..) => match op {
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
            BinOp::Pow => PREC_POW,
        },
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Sym(s) => f.write_str(s),
            Expr::Neg(inner) => {
                // A bare literal after `-` would fold into the constant on re-parse.
                let parens = matches!(**inner, Expr::Const(_)) || precedence(inner) < PREC_NEG;
                f.write_str("-")?;
                write_wrapped(f, inner, parens)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Binary(op, lhs, rhs) => {
                let (sym, prec) = match op {
                    BinOp::Add => (" + ", PREC_ADD),
                    BinOp::Sub => (" - ", PREC_ADD),
                    BinOp::Mul => (" * ", PREC_MUL),
                    BinOp::Div => (" / ", PREC_MUL),
                    BinOp::Pow => ("^", PREC_POW),
                };
                let (lp, rp) = if *op == BinOp::Pow {
                    (precedence(lhs) <= PREC_POW, precedence(rhs) < PREC_NEG)
                } else {
                    (precedence(lhs) < prec, precedence(rhs) <= prec)
                };
                write_wrapped(f, lhs, lp)?;
                f.write_str(sym)?;
                write_wrapped(f, rhs, rp)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn apply_binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            a / b
        }
        BinOp::Pow => {
            let v = if b.fract() == 0.0 && b.abs() <= 64.0 {
                a.powi(b as i32)
            } else {
                a.powf(b)
            };
            if v.is_nan() && !a.is_nan() && !b.is_nan() {
                return Err(EvalError::PowDomain(a, b));
            }
            v
        }
    })
}

fn apply_func(func: Func, a: f64) -> Result<f64, EvalError> {
    match func {
        Func::Exp => Ok(a.exp()),
        Func::Log => {
            if a <= 0.0 {
                Err(EvalError::LogDomain(a))
            } else {
                Ok(a.ln())
            }
        }
        Func::Sqrt => {
            if a < 0.0 {
                Err(EvalError::SqrtDomain(a))
            } else {
                Ok(a.sqrt())
            }
        }
    }
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn symbol(name: impl Into<String>) -> Expr {
        Expr::Sym(name.into())
    }

    /// Evaluates with symbol values supplied by `lookup`.
    pub fn eval_with<F>(&self, lookup: &F) -> Result<f64, EvalError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Sym(s) => lookup(s).ok_or_else(|| EvalError::Unbound(s.clone())),
            Expr::Neg(a) => Ok(-a.eval_with(lookup)?),
            Expr::Binary(op, a, b) => apply_binary(*op, a.eval_with(lookup)?, b.eval_with(lookup)?),
            Expr::Call(func, a) => apply_func(*func, a.eval_with(lookup)?),
        }
    }

    pub fn evaluate(&self, env: &HashMap<String, f64>) -> Result<f64, EvalError> {
        self.eval_with(&|s: &str| env.get(s).copied())
    }

    /// Free symbols, sorted.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_symbols(out),
            Expr::Binary(_, a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn depends_on(&self, sym: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Sym(s) => s == sym,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(sym),
            Expr::Binary(_, a, b) => a.depends_on(sym) || b.depends_on(sym),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    /// Exact partial derivative with respect to `sym`.
    ///
    /// Only light simplification is applied (`0*a`, `a+0`, `a*1`, constant
    /// folding of two literals), so the result stays close to the textbook
    /// rule that produced it.
    pub fn differentiate(&self, sym: &str) -> Expr {
        if !self.depends_on(sym) {
            return Expr::Const(0.0);
        }
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Sym(_) => Expr::Const(1.0),
            Expr::Neg(a) => neg(a.differentiate(sym)),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.as_ref(), b.as_ref());
                match op {
                    BinOp::Add => add(a.differentiate(sym), b.differentiate(sym)),
                    BinOp::Sub => sub(a.differentiate(sym), b.differentiate(sym)),
                    BinOp::Mul => add(
                        mul(a.differentiate(sym), b.clone()),
                        mul(a.clone(), b.differentiate(sym)),
                    ),
                    BinOp::Div => {
                        let num = sub(
                            mul(a.differentiate(sym), b.clone()),
                            mul(a.clone(), b.differentiate(sym)),
                        );
                        div(num, pow(b.clone(), Expr::Const(2.0)))
                    }
                    BinOp::Pow => {
                        if !b.depends_on(sym) {
                            // d(a^c) = c a^(c-1) a'
                            let reduced = sub(b.clone(), Expr::Const(1.0));
                            mul(mul(b.clone(), pow(a.clone(), reduced)), a.differentiate(sym))
                        } else if !a.depends_on(sym) {
                            // d(c^b) = c^b log(c) b'
                            mul(
                                mul(self.clone(), Expr::Call(Func::Log, Box::new(a.clone()))),
                                b.differentiate(sym),
                            )
                        } else {
                            // d(a^b) = a^b (b' log a + b a' / a)
                            let t1 = mul(b.differentiate(sym), Expr::Call(Func::Log, Box::new(a.clone())));
                            let t2 = div(mul(b.clone(), a.differentiate(sym)), a.clone());
                            mul(self.clone(), add(t1, t2))
                        }
                    }
                }
            }
            Expr::Call(func, a) => {
                let inner = a.differentiate(sym);
                let outer = match func {
                    Func::Exp => self.clone(),
                    Func::Log => div(Expr::Const(1.0), a.as_ref().clone()),
                    Func::Sqrt => div(Expr::Const(1.0), mul(Expr::Const(2.0), self.clone())),
                };
                mul(outer, inner)
            }
        }
    }

    /// Resolves symbols to slot indices for repeated fast evaluation.
    pub fn compile<F>(&self, resolve: &F) -> Result<CompiledExpr, EvalError>
    where
        F: Fn(&str) -> Option<usize>,
    {
        Ok(match self {
            Expr::Const(c) => CompiledExpr::Const(*c),
            Expr::Sym(s) => CompiledExpr::Slot(resolve(s).ok_or_else(|| EvalError::Unbound(s.clone()))?),
            Expr::Neg(a) => CompiledExpr::Neg(Box::new(a.compile(resolve)?)),
            Expr::Binary(op, a, b) => {
                CompiledExpr::Binary(*op, Box::new(a.compile(resolve)?), Box::new(b.compile(resolve)?))
            }
            Expr::Call(func, a) => CompiledExpr::Call(*func, Box::new(a.compile(resolve)?)),
        })
    }
}

// Smart constructors with light simplification.

fn fold(op: BinOp, a: &Expr, b: &Expr) -> Option<Expr> {
    if let (Expr::Const(x), Expr::Const(y)) = (a, b) {
        apply_binary(op, *x, *y).ok().filter(|v| v.is_finite()).map(Expr::Const)
    } else {
        None
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    fold(BinOp::Add, &a, &b).unwrap_or_else(|| Expr::Binary(BinOp::Add, Box::new(a), Box::new(b)))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_zero() {
        return a;
    }
    if a.is_zero() {
        return neg(b);
    }
    fold(BinOp::Sub, &a, &b).unwrap_or_else(|| Expr::Binary(BinOp::Sub, Box::new(a), Box::new(b)))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        return Expr::Const(0.0);
    }
    if a.is_one() {
        return b;
    }
    if b.is_one() {
        return a;
    }
    fold(BinOp::Mul, &a, &b).unwrap_or_else(|| Expr::Binary(BinOp::Mul, Box::new(a), Box::new(b)))
}

fn div(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        return Expr::Const(0.0);
    }
    if b.is_one() {
        return a;
    }
    fold(BinOp::Div, &a, &b).unwrap_or_else(|| Expr::Binary(BinOp::Div, Box::new(a), Box::new(b)))
}

fn pow(a: Expr, b: Expr) -> Expr {
    if b.is_one() {
        return a;
    }
    fold(BinOp::Pow, &a, &b).unwrap_or_else(|| Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b)))
}

/// Expression with symbols replaced by indices into a value slice.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledExpr {
    Const(f64),
    Slot(usize),
    Neg(Box<CompiledExpr>),
    Binary(BinOp, Box<CompiledExpr>, Box<CompiledExpr>),
    Call(Func, Box<CompiledExpr>),
}

impl CompiledExpr {
    pub fn eval(&self, slots: &[f64]) -> Result<f64, EvalError> {
        match self {
            CompiledExpr::Const(c) => Ok(*c),
            CompiledExpr::Slot(i) => Ok(slots[*i]),
            CompiledExpr::Neg(a) => Ok(-a.eval(slots)?),
            CompiledExpr::Binary(op, a, b) => apply_binary(*op, a.eval(slots)?, b.eval(slots)?),
            CompiledExpr::Call(func, a) => apply_func(*func, a.eval(slots)?),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, CompiledExpr::Const(c) if *c == 0.0)
    }
}
