//! A small expression DSL for the equation nonlinearities `f(u, ux)` and
//! `g(u, ux)`.
//!
//! Supported syntax: decimal literals, the reserved variables `u` and `ux`,
//! named parameters, `+ - * / ^` with standard precedence (`^` binds tighter
//! than unary minus, which binds tighter than `* /`, which bind tighter than
//! `+ -`), `* / + -` left-associative, `^` right-associative, and the
//! functions `exp log sin cos tan sqrt abs sign pow`. There is no implicit
//! multiplication: `2u` is a parse error.
//!
//! Parsing and evaluation never panic: all failures are returned as error
//! values carrying the byte offset of the offending source fragment.
//! Evaluation follows IEEE double precision; domain violations (division by
//! zero, `log`/`sqrt`/`pow` outside their domains, non-finite results) are
//! reported as errors rather than silent NaNs. `sign(0)` is `0`.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Byte range of a node in the original source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// Which of the two nonlinearities of an equation spec is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    F,
    G,
}

impl fmt::Display for Which {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Which::F => out.write_str("f"),
            Which::G => out.write_str("g"),
        }
    }
}

/// Reserved variables of the DSL.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// The wave profile value `u`.
    U,
    /// The spatial derivative `ux`.
    Ux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<ExprAst>),
    Bin(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Box<ExprAst>),
}

/// A parsed expression tree. Every node keeps its source span so that
/// runtime evaluation errors can point back into the original text.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    pub node: Node,
    pub span: Span,
}

/// A parse failure at a byte offset of the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "byte {}: {}", self.offset, self.message)
    }
}

impl core::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogDomain(f64),
    SqrtDomain(f64),
    PowDomain { base: f64, exponent: f64 },
    UnboundParameter(String),
    NonFinite,
}

/// A runtime evaluation failure, pointing at the source span of the node
/// where the domain violation occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub offset: usize,
    pub kind: EvalErrorKind,
}

impl fmt::Display for EvalError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "byte {}: ", self.offset)?;
        match &self.kind {
            EvalErrorKind::DivisionByZero => out.write_str("division by zero"),
            EvalErrorKind::LogDomain(x) => write!(out, "log of non-positive value {x}"),
            EvalErrorKind::SqrtDomain(x) => write!(out, "sqrt of negative value {x}"),
            EvalErrorKind::PowDomain { base, exponent } => {
                write!(out, "{base} ^ {exponent} is outside the real domain")
            }
            EvalErrorKind::UnboundParameter(name) => {
                write!(out, "parameter `{name}` is not bound")
            }
            EvalErrorKind::NonFinite => out.write_str("result is not finite"),
        }
    }
}

impl core::error::Error for EvalError {}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum TokKind {
    Num(f64),
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Debug, Clone, Copy)]
struct Token {
    kind: TokKind,
    start: usize,
    end: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'+' => toks.push(Token { kind: TokKind::Plus, start, end: i + 1 }),
            b'-' => toks.push(Token { kind: TokKind::Minus, start, end: i + 1 }),
            b'*' => toks.push(Token { kind: TokKind::Star, start, end: i + 1 }),
            b'/' => toks.push(Token { kind: TokKind::Slash, start, end: i + 1 }),
            b'^' => toks.push(Token { kind: TokKind::Caret, start, end: i + 1 }),
            b'(' => toks.push(Token { kind: TokKind::LParen, start, end: i + 1 }),
            b')' => toks.push(Token { kind: TokKind::RParen, start, end: i + 1 }),
            b',' => toks.push(Token { kind: TokKind::Comma, start, end: i + 1 }),
            b'0'..=b'9' | b'.' => {
                let end = scan_number(bytes, start).ok_or_else(|| ParseError {
                    offset: start,
                    message: "invalid number literal".to_string(),
                })?;
                let text = &src[start..end];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    message: format!("invalid number literal `{text}`"),
                })?;
                toks.push(Token { kind: TokKind::Num(value), start, end });
                i = end;
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = i + 1;
                while end < bytes.len()
                    && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
                {
                    end += 1;
                }
                toks.push(Token { kind: TokKind::Ident, start, end });
                i = end;
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
        i += 1;
    }
    toks.push(Token { kind: TokKind::Eof, start: bytes.len(), end: bytes.len() });
    Ok(toks)
}

/// Scans a number starting at `start`: digits, an optional fraction, and an
/// optional exponent. Returns the end offset, or None for a bare `.`.
fn scan_number(bytes: &[u8], start: usize) -> Option<usize> {
    let mut i = start;
    let mut saw_digit = false;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        saw_digit = true;
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            saw_digit = true;
            i += 1;
        }
    }
    if !saw_digit {
        return None;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    Some(i)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

/// Parses one expression from `src`.
pub fn parse(src: &str) -> Result<ExprAst, ParseError> {
    let toks = lex(src)?;
    let mut parser = Parser { src, toks, pos: 0 };
    let ast = parser.sum()?;
    let tail = parser.peek();
    if tail.kind != TokKind::Eof {
        return Err(ParseError {
            offset: tail.start,
            message: format!("unexpected trailing input `{}`", parser.text(tail)),
        });
    }
    Ok(ast)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Token {
        self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let tok = self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn text(&self, tok: Token) -> &'a str {
        &self.src[tok.start..tok.end]
    }

    fn sum(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek().kind {
                TokKind::Plus => BinOp::Add,
                TokKind::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.product()?;
            lhs = bin_node(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<ExprAst, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokKind::Star => BinOp::Mul,
                TokKind::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = bin_node(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ExprAst, ParseError> {
        if self.peek().kind == TokKind::Minus {
            let minus = self.bump();
            let inner = self.unary()?;
            let span = Span { start: minus.start, end: inner.span.end };
            return Ok(ExprAst { node: Node::Neg(Box::new(inner)), span });
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ParseError> {
        let base = self.atom()?;
        if self.peek().kind == TokKind::Caret {
            self.bump();
            // The exponent may start with a unary minus: `u^-2`.
            let expo = self.unary()?;
            return Ok(bin_node(BinOp::Pow, base, expo));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ExprAst, ParseError> {
        let tok = self.peek();
        match tok.kind {
            TokKind::Num(value) => {
                self.bump();
                Ok(ExprAst {
                    node: Node::Num(value),
                    span: Span { start: tok.start, end: tok.end },
                })
            }
            TokKind::Ident => {
                self.bump();
                if self.peek().kind == TokKind::LParen {
                    return self.call(tok);
                }
                let name = self.text(tok);
                let node = match name {
                    "u" => Node::Var(Var::U),
                    "ux" => Node::Var(Var::Ux),
                    _ => Node::Param(name.to_string()),
                };
                Ok(ExprAst { node, span: Span { start: tok.start, end: tok.end } })
            }
            TokKind::LParen => {
                self.bump();
                let inner = self.sum()?;
                let close = self.peek();
                if close.kind != TokKind::RParen {
                    return Err(ParseError {
                        offset: close.start,
                        message: "expected `)`".to_string(),
                    });
                }
                let close = self.bump();
                Ok(ExprAst {
                    node: inner.node,
                    span: Span { start: tok.start, end: close.end },
                })
            }
            TokKind::Eof => Err(ParseError {
                offset: tok.start,
                message: "expected an expression".to_string(),
            }),
            _ => Err(ParseError {
                offset: tok.start,
                message: format!("expected an expression, found `{}`", self.text(tok)),
            }),
        }
    }

    fn call(&mut self, name_tok: Token) -> Result<ExprAst, ParseError> {
        let name = self.text(name_tok);
        self.bump(); // consume `(`
        let first = self.sum()?;
        if name == "pow" {
            let comma = self.peek();
            if comma.kind != TokKind::Comma {
                return Err(ParseError {
                    offset: comma.start,
                    message: "`pow` takes two arguments separated by `,`".to_string(),
                });
            }
            self.bump();
            let second = self.sum()?;
            let close = self.expect_rparen()?;
            return Ok(ExprAst {
                node: Node::Bin(BinOp::Pow, Box::new(first), Box::new(second)),
                span: Span { start: name_tok.start, end: close.end },
            });
        }
        let func = match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => {
                return Err(ParseError {
                    offset: name_tok.start,
                    message: format!("unknown function `{name}`"),
                })
            }
        };
        let close = self.expect_rparen()?;
        Ok(ExprAst {
            node: Node::Call(func, Box::new(first)),
            span: Span { start: name_tok.start, end: close.end },
        })
    }

    fn expect_rparen(&mut self) -> Result<Token, ParseError> {
        let tok = self.peek();
        if tok.kind != TokKind::RParen {
            return Err(ParseError { offset: tok.start, message: "expected `)`".to_string() });
        }
        Ok(self.bump())
    }
}

fn bin_node(op: BinOp, lhs: ExprAst, rhs: ExprAst) -> ExprAst {
    let span = Span { start: lhs.span.start, end: rhs.span.end };
    ExprAst { node: Node::Bin(op, Box::new(lhs), Box::new(rhs)), span }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

impl ExprAst {
    /// Evaluates the expression at `(u, ux)` with the given parameter
    /// bindings.
    pub fn eval(
        &self,
        u: f64,
        ux: f64,
        params: &BTreeMap<String, f64>,
    ) -> Result<f64, EvalError> {
        let value = match &self.node {
            Node::Num(v) => *v,
            Node::Var(Var::U) => u,
            Node::Var(Var::Ux) => ux,
            Node::Param(name) => *params.get(name).ok_or_else(|| EvalError {
                offset: self.span.start,
                kind: EvalErrorKind::UnboundParameter(name.clone()),
            })?,
            Node::Neg(inner) => -inner.eval(u, ux, params)?,
            Node::Bin(op, lhs, rhs) => {
                let a = lhs.eval(u, ux, params)?;
                let b = rhs.eval(u, ux, params)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError {
                                offset: self.span.start,
                                kind: EvalErrorKind::DivisionByZero,
                            });
                        }
                        a / b
                    }
                    BinOp::Pow => eval_pow(a, b, self.span.start)?,
                }
            }
            Node::Call(func, arg) => {
                let a = arg.eval(u, ux, params)?;
                match func {
                    Func::Exp => math::exp(a),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(EvalError {
                                offset: self.span.start,
                                kind: EvalErrorKind::LogDomain(a),
                            });
                        }
                        math::ln(a)
                    }
                    Func::Sin => math::sin(a),
                    Func::Cos => math::cos(a),
                    Func::Tan => math::tan(a),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError {
                                offset: self.span.start,
                                kind: EvalErrorKind::SqrtDomain(a),
                            });
                        }
                        math::sqrt(a)
                    }
                    Func::Abs => a.abs(),
                    Func::Sign => {
                        if a == 0.0 {
                            0.0
                        } else if a > 0.0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                }
            }
        };
        if !value.is_finite() {
            return Err(EvalError { offset: self.span.start, kind: EvalErrorKind::NonFinite });
        }
        Ok(value)
    }

    /// Splits the expression into its even and odd parts with respect to the
    /// reflection `ux -> -ux`, evaluated at `(u, ux)`. Returns `(even, odd)`.
    pub fn even_odd_at(
        &self,
        u: f64,
        ux: f64,
        params: &BTreeMap<String, f64>,
    ) -> Result<(f64, f64), EvalError> {
        let plus = self.eval(u, ux, params)?;
        let minus = self.eval(u, -ux, params)?;
        Ok((0.5 * (plus + minus), 0.5 * (plus - minus)))
    }

    /// Collects the names of all parameters appearing in the expression.
    pub fn free_params(&self, out: &mut BTreeSet<String>) {
        match &self.node {
            Node::Param(name) => {
                out.insert(name.clone());
            }
            Node::Neg(inner) | Node::Call(_, inner) => inner.free_params(out),
            Node::Bin(_, lhs, rhs) => {
                lhs.free_params(out);
                rhs.free_params(out);
            }
            Node::Num(_) | Node::Var(_) => {}
        }
    }

    pub(crate) fn contains_u(&self) -> bool {
        match &self.node {
            Node::Var(Var::U) => true,
            Node::Num(_) | Node::Var(Var::Ux) | Node::Param(_) => false,
            Node::Neg(inner) | Node::Call(_, inner) => inner.contains_u(),
            Node::Bin(_, lhs, rhs) => lhs.contains_u() || rhs.contains_u(),
        }
    }

    /// Partial derivative with respect to `u`, or `None` when the tree
    /// contains `abs` or `sign` (whose derivatives are not smooth).
    pub(crate) fn derivative_u(&self) -> Option<ExprAst> {
        let span = self.span;
        let d = match &self.node {
            Node::Num(_) | Node::Var(Var::Ux) | Node::Param(_) => lit(0.0, span),
            Node::Var(Var::U) => lit(1.0, span),
            Node::Neg(inner) => neg(inner.derivative_u()?, span),
            Node::Bin(BinOp::Add, lhs, rhs) => {
                add(lhs.derivative_u()?, rhs.derivative_u()?, span)
            }
            Node::Bin(BinOp::Sub, lhs, rhs) => {
                sub(lhs.derivative_u()?, rhs.derivative_u()?, span)
            }
            Node::Bin(BinOp::Mul, lhs, rhs) => {
                let dl = lhs.derivative_u()?;
                let dr = rhs.derivative_u()?;
                add(
                    mul(dl, (**rhs).clone(), span),
                    mul((**lhs).clone(), dr, span),
                    span,
                )
            }
            Node::Bin(BinOp::Div, lhs, rhs) => {
                let dl = lhs.derivative_u()?;
                let dr = rhs.derivative_u()?;
                let numer = sub(
                    mul(dl, (**rhs).clone(), span),
                    mul((**lhs).clone(), dr, span),
                    span,
                );
                let denom = pow((**rhs).clone(), lit(2.0, span), span);
                div(numer, denom, span)
            }
            Node::Bin(BinOp::Pow, base, expo) => {
                let db = base.derivative_u()?;
                if !expo.contains_u() {
                    // d/du b^c = c * b^(c-1) * b'
                    let lowered = sub((**expo).clone(), lit(1.0, span), span);
                    mul(
                        mul((**expo).clone(), pow((**base).clone(), lowered, span), span),
                        db,
                        span,
                    )
                } else {
                    // d/du b^e = b^e * (e' log b + e b' / b)
                    let de = expo.derivative_u()?;
                    let log_term = mul(de, call(Func::Log, (**base).clone(), span), span);
                    let ratio = div(mul((**expo).clone(), db, span), (**base).clone(), span);
                    mul((*self).clone(), add(log_term, ratio, span), span)
                }
            }
            Node::Call(func, arg) => {
                let da = arg.derivative_u()?;
                let outer = match func {
                    Func::Exp => call(Func::Exp, (**arg).clone(), span),
                    Func::Log => return Some(div(da, (**arg).clone(), span)),
                    Func::Sin => call(Func::Cos, (**arg).clone(), span),
                    Func::Cos => {
                        let s = call(Func::Sin, (**arg).clone(), span);
                        neg(s, span)
                    }
                    Func::Tan => {
                        let c = call(Func::Cos, (**arg).clone(), span);
                        return Some(div(da, pow(c, lit(2.0, span), span), span));
                    }
                    Func::Sqrt => {
                        let root = call(Func::Sqrt, (**arg).clone(), span);
                        return Some(div(da, mul(lit(2.0, span), root, span), span));
                    }
                    Func::Abs | Func::Sign => return None,
                };
                mul(outer, da, span)
            }
        };
        Some(d)
    }
}

fn eval_pow(base: f64, expo: f64, offset: usize) -> Result<f64, EvalError> {
    if expo == 0.0 {
        return Ok(1.0);
    }
    if base == 0.0 {
        if expo < 0.0 {
            return Err(EvalError { offset, kind: EvalErrorKind::DivisionByZero });
        }
        return Ok(0.0);
    }
    if base < 0.0 {
        if expo == math::floor(expo) && expo.abs() < 9.0e15 {
            let magnitude = math::powf(-base, expo);
            let odd = (expo as i64) % 2 != 0;
            return Ok(if odd { -magnitude } else { magnitude });
        }
        return Err(EvalError { offset, kind: EvalErrorKind::PowDomain { base, exponent: expo } });
    }
    Ok(math::powf(base, expo))
}

// Smart constructors used by `derivative_u`. They fold the trivial
// zero/one cases so derivative trees stay small.

fn lit(v: f64, span: Span) -> ExprAst {
    ExprAst { node: Node::Num(v), span }
}

fn is_lit(e: &ExprAst, v: f64) -> bool {
    matches!(e.node, Node::Num(x) if x == v)
}

fn neg(e: ExprAst, span: Span) -> ExprAst {
    if is_lit(&e, 0.0) {
        return lit(0.0, span);
    }
    ExprAst { node: Node::Neg(Box::new(e)), span }
}

fn add(a: ExprAst, b: ExprAst, span: Span) -> ExprAst {
    if is_lit(&a, 0.0) {
        return b;
    }
    if is_lit(&b, 0.0) {
        return a;
    }
    ExprAst { node: Node::Bin(BinOp::Add, Box::new(a), Box::new(b)), span }
}

fn sub(a: ExprAst, b: ExprAst, span: Span) -> ExprAst {
    if is_lit(&b, 0.0) {
        return a;
    }
    if let (Node::Num(x), Node::Num(y)) = (&a.node, &b.node) {
        return lit(x - y, span);
    }
    ExprAst { node: Node::Bin(BinOp::Sub, Box::new(a), Box::new(b)), span }
}

fn mul(a: ExprAst, b: ExprAst, span: Span) -> ExprAst {
    if is_lit(&a, 0.0) || is_lit(&b, 0.0) {
        return lit(0.0, span);
    }
    if is_lit(&a, 1.0) {
        return b;
    }
    if is_lit(&b, 1.0) {
        return a;
    }
    ExprAst { node: Node::Bin(BinOp::Mul, Box::new(a), Box::new(b)), span }
}

fn div(a: ExprAst, b: ExprAst, span: Span) -> ExprAst {
    if is_lit(&a, 0.0) {
        return lit(0.0, span);
    }
    if is_lit(&b, 1.0) {
        return a;
    }
    ExprAst { node: Node::Bin(BinOp::Div, Box::new(a), Box::new(b)), span }
}

fn pow(a: ExprAst, b: ExprAst, span: Span) -> ExprAst {
    if is_lit(&b, 1.0) {
        return a;
    }
    if is_lit(&b, 0.0) {
        return lit(1.0, span);
    }
    ExprAst { node: Node::Bin(BinOp::Pow, Box::new(a), Box::new(b)), span }
}

fn call(func: Func, arg: ExprAst, span: Span) -> ExprAst {
    ExprAst { node: Node::Call(func, Box::new(arg)), span }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

/// Operator precedence used by the printer; larger binds tighter.
fn precedence(e: &ExprAst) -> u8 {
    match &e.node {
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Num(v) if *v < 0.0 => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(out: &mut fmt::Formatter<'_>, e: &ExprAst, wrap: bool) -> fmt::Result {
            if wrap {
                write!(out, "({e})")
            } else {
                write!(out, "{e}")
            }
        }
        match &self.node {
            Node::Num(v) => write!(out, "{v}"),
            Node::Var(Var::U) => out.write_str("u"),
            Node::Var(Var::Ux) => out.write_str("ux"),
            Node::Param(name) => out.write_str(name),
            Node::Neg(inner) => {
                out.write_str("-")?;
                child(out, inner, precedence(inner) < 3)
            }
            Node::Bin(op, lhs, rhs) => {
                let (sym, prec) = match op {
                    BinOp::Add => (" + ", 1),
                    BinOp::Sub => (" - ", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    // Right-associative; the exponent may be a unary minus.
                    child(out, lhs, precedence(lhs) <= 4)?;
                    out.write_str(sym)?;
                    child(out, rhs, precedence(rhs) < 3)
                } else {
                    child(out, lhs, precedence(lhs) < prec)?;
                    out.write_str(sym)?;
                    child(out, rhs, precedence(rhs) <= prec)
                }
            }
            Node::Call(func, arg) => write!(out, "{}({arg})", func.name()),
        }
    }
}

// ---------------------------------------------------------------------------
// Equation specs
// ---------------------------------------------------------------------------

/// A complete equation choice: the two nonlinearities plus parameter
/// bindings.
#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    pub f: ExprAst,
    pub g: ExprAst,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecError {
    Parse { which: Which, error: ParseError },
    UnboundParameter { which: Which, name: String },
    ReservedName { name: String },
}

impl fmt::Display for SpecError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::Parse { which, error } => write!(out, "in {which}: {error}"),
            SpecError::UnboundParameter { which, name } => {
                write!(out, "in {which}: parameter `{name}` is not bound")
            }
            SpecError::ReservedName { name } => {
                write!(out, "`{name}` is a reserved variable and cannot be a parameter")
            }
        }
    }
}

impl core::error::Error for SpecError {}

impl NonlinearitySpec {
    /// Parses both nonlinearities and validates the parameter bindings.
    pub fn parse(
        f_src: &str,
        g_src: &str,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, SpecError> {
        let f = parse(f_src)
            .map_err(|error| SpecError::Parse { which: Which::F, error })?;
        let g = parse(g_src)
            .map_err(|error| SpecError::Parse { which: Which::G, error })?;
        let spec = NonlinearitySpec { f, g, params };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks that every parameter used by `f` or `g` is bound and that no
    /// binding shadows the reserved variables.
    pub fn validate(&self) -> Result<(), SpecError> {
        for reserved in ["u", "ux"] {
            if self.params.contains_key(reserved) {
                return Err(SpecError::ReservedName { name: reserved.to_string() });
            }
        }
        for (which, ast) in [(Which::F, &self.f), (Which::G, &self.g)] {
            let mut used = BTreeSet::new();
            ast.free_params(&mut used);
            for name in used {
                if !self.params.contains_key(&name) {
                    return Err(SpecError::UnboundParameter { which, name });
                }
            }
        }
        Ok(())
    }

    pub fn expr(&self, which: Which) -> &ExprAst {
        match which {
            Which::F => &self.f,
            Which::G => &self.g,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn eval_str(src: &str, u: f64, ux: f64, pairs: &[(&str, f64)]) -> Result<f64, EvalError> {
        parse(src).unwrap().eval(u, ux, &params(pairs))
    }

    #[test]
    fn accepts_well_formed_expressions() {
        let accepted = [
            "ux",
            "k*(u-2)*(u-1)",
            "u^(p-1)*(u^2 + lam*ux^2)",
            "2*u + 3.5e-2",
            "exp(-u)*sin(ux)",
            "pow(u, 2)",
            "-u^2",
            "sqrt(abs(ux))",
            "sign(u)*abs(ux) + u/2",
            "((u))*1.5",
        ];
        for src in accepted {
            parse(src).unwrap_or_else(|e| panic!("`{src}` failed to parse: {e}"));
        }
    }

    #[test]
    fn rejects_with_byte_offsets() {
        let rejected: [(&str, usize); 7] = [
            ("2u", 1),
            ("", 0),
            ("u +", 3),
            ("(u", 2),
            ("foo(u)", 0),
            ("u @ 2", 2),
            ("u * * 2", 4),
        ];
        for (src, offset) in rejected {
            let err = parse(src).expect_err(src);
            assert_eq!(err.offset, offset, "`{src}`: {}", err.message);
        }
    }

    #[test]
    fn evaluates_reference_cases() {
        assert_eq!(eval_str("ux", 5.0, 3.0, &[]).unwrap(), 3.0);
        assert_eq!(
            eval_str("k*(u-2)*(u-1)", 1.5, 0.0, &[("k", 1.0)]).unwrap(),
            -0.25
        );
        assert_eq!(eval_str("u^2 - ux^2", 2.0, 1.0, &[]).unwrap(), 3.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval_str("-u^2", 3.0, 0.0, &[]).unwrap(), -9.0);
        assert_eq!(eval_str("2^-3", 0.0, 0.0, &[]).unwrap(), 0.125);
        assert_eq!(eval_str("2^3^2", 0.0, 0.0, &[]).unwrap(), 512.0);
        assert_eq!(eval_str("6/3/2", 0.0, 0.0, &[]).unwrap(), 1.0);
        assert_eq!(eval_str("1-2-3", 0.0, 0.0, &[]).unwrap(), -4.0);
        assert_eq!(eval_str("2*3^2", 0.0, 0.0, &[]).unwrap(), 18.0);
        assert_eq!(eval_str("-2*u", 1.0, 0.0, &[]).unwrap(), -2.0);
    }

    #[test]
    fn sign_at_zero_is_zero() {
        assert_eq!(eval_str("sign(u)", 0.0, 0.0, &[]).unwrap(), 0.0);
        assert_eq!(eval_str("sign(u)", -3.0, 0.0, &[]).unwrap(), -1.0);
        assert_eq!(eval_str("sign(u)", 7.0, 0.0, &[]).unwrap(), 1.0);
    }

    #[test]
    fn pow_corner_cases() {
        assert_eq!(eval_str("u^0", 0.0, 0.0, &[]).unwrap(), 1.0);
        assert_eq!(eval_str("u^2", -2.0, 0.0, &[]).unwrap(), 4.0);
        assert_eq!(eval_str("u^3", -2.0, 0.0, &[]).unwrap(), -8.0);
        assert_eq!(eval_str("u^-1", -2.0, 0.0, &[]).unwrap(), -0.5);
        assert!(matches!(
            eval_str("u^0.5", -2.0, 0.0, &[]).unwrap_err().kind,
            EvalErrorKind::PowDomain { .. }
        ));
        assert!(matches!(
            eval_str("u^-1", 0.0, 0.0, &[]).unwrap_err().kind,
            EvalErrorKind::DivisionByZero
        ));
    }

    #[test]
    fn domain_violations_are_errors_with_offsets() {
        let err = eval_str("1/(u - 1)", 1.0, 0.0, &[]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(err.offset, 0);

        let err = eval_str("u + log(u)", -1.0, 0.0, &[]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::LogDomain(-1.0));
        assert_eq!(err.offset, 4);

        assert!(matches!(
            eval_str("sqrt(u)", -4.0, 0.0, &[]).unwrap_err().kind,
            EvalErrorKind::SqrtDomain(_)
        ));
        assert!(matches!(
            eval_str("exp(u)*u", 1.0e300, 0.0, &[]).unwrap_err().kind,
            EvalErrorKind::NonFinite
        ));
    }

    #[test]
    fn unbound_parameter_is_reported() {
        let err = eval_str("k*u", 1.0, 0.0, &[]).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::UnboundParameter("k".to_string()));
    }

    #[test]
    fn even_odd_decomposition() {
        let f = parse("k*u^p").unwrap();
        let (even, odd) = f.even_odd_at(2.0, 7.0, &params(&[("k", 1.0), ("p", 3.0)])).unwrap();
        assert_eq!((even, odd), (8.0, 0.0));

        let g = parse("lam*u^q*ux").unwrap();
        let (even, odd) = g.even_odd_at(2.0, 3.0, &params(&[("lam", 1.0), ("q", 1.0)])).unwrap();
        assert_eq!((even, odd), (0.0, 6.0));
    }

    #[test]
    fn even_plus_odd_reconstructs() {
        let e = parse("u*ux + exp(ux)*sin(u) - 0.5*ux^3").unwrap();
        let p = params(&[]);
        for (u, ux) in [(0.3, 1.7), (-1.2, 0.4), (2.0, -2.0)] {
            let (even, odd) = e.even_odd_at(u, ux, &p).unwrap();
            let direct = e.eval(u, ux, &p).unwrap();
            assert!((even + odd - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn print_parse_round_trip_preserves_evaluation() {
        use rand::{Rng, SeedableRng};
        let corpus = [
            "k*(u-2)*(u-1)",
            "u^(p-1)*(u^2 + lam*ux^2)",
            "-u^2 + ux/(u - 4)",
            "sign(u)*abs(ux) - sqrt(abs(u))",
            "exp(-u)*sin(ux) + cos(u)/tan(ux + 4)",
            "2^-3 * u - ux^2^2",
            "pow(u, 2) - pow(ux, p-1)",
        ];
        let p = params(&[("k", 2.0), ("p", 3.0), ("lam", -1.5)]);
        let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
        for src in corpus {
            let ast = parse(src).unwrap();
            let printed = ast.to_string();
            let reparsed = parse(&printed)
                .unwrap_or_else(|e| panic!("printed `{printed}` failed to parse: {e}"));
            for _ in 0..100 {
                let u = rng.gen_range(-3.0..3.0);
                let ux = rng.gen_range(-3.0..3.0);
                match (ast.eval(u, ux, &p), reparsed.eval(u, ux, &p)) {
                    (Ok(a), Ok(b)) => assert_eq!(a.to_bits(), b.to_bits(), "{src} at ({u},{ux})"),
                    (Err(_), Err(_)) => {}
                    (a, b) => panic!("{src}: eval mismatch {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn printer_parenthesizes_structure() {
        let cases = [
            ("u - (ux - 1)", "u - (ux - 1)"),
            ("(u + 1)*ux", "(u + 1)*ux"),
            ("(u^2)^3", "(u^2)^3"),
            ("u^(2^3)", "u^2^3"),
            ("-(u*ux)", "-(u*ux)"),
        ];
        for (src, expect) in cases {
            assert_eq!(parse(src).unwrap().to_string(), expect, "{src}");
        }
    }

    #[test]
    fn derivative_u_matches_finite_differences() {
        let cases = [
            "k*(u-2)*(u-1)",
            "u^(p-1)*(u^2 + lam*ux^2)",
            "exp(-u)*sin(u) + u/(u + 3)",
            "sqrt(u + 2)*tan(u/4) - log(u + 5)",
            "pow(u, 3) - cos(u)^2",
        ];
        let p = params(&[("k", 2.0), ("p", 3.0), ("lam", -1.5)]);
        for src in cases {
            let ast = parse(src).unwrap();
            let deriv = ast.derivative_u().expect(src);
            for u in [0.4f64, 1.3, 2.2] {
                let ux = 0.7;
                let h = 1e-6 * u.abs().max(1.0);
                let fd = (ast.eval(u + h, ux, &p).unwrap() - ast.eval(u - h, ux, &p).unwrap())
                    / (2.0 * h);
                let sym = deriv.eval(u, ux, &p).unwrap();
                assert!(
                    (sym - fd).abs() <= 1e-5 * sym.abs().max(1.0),
                    "{src} at u={u}: symbolic {sym} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn derivative_u_declines_on_abs_and_sign() {
        assert!(parse("abs(u)*ux").unwrap().derivative_u().is_none());
        assert!(parse("sign(u) + u").unwrap().derivative_u().is_none());
        assert!(parse("abs(ux) + u").unwrap().derivative_u().is_none());
    }

    #[test]
    fn spec_validation() {
        let spec = NonlinearitySpec::parse("k*ux", "u", params(&[("k", 1.0)])).unwrap();
        spec.validate().unwrap();

        let err = NonlinearitySpec::parse("k*ux", "u", params(&[])).unwrap_err();
        assert!(matches!(err, SpecError::UnboundParameter { which: Which::F, ref name } if name == "k"));

        let err = NonlinearitySpec::parse("ux", "u", params(&[("u", 1.0)])).unwrap_err();
        assert!(matches!(err, SpecError::ReservedName { .. }));

        let err = NonlinearitySpec::parse("2u", "u", params(&[])).unwrap_err();
        match err {
            SpecError::Parse { which: Which::F, error } => assert_eq!(error.offset, 1),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn number_literal_forms() {
        let vals = vec![
            ("0.5", 0.5),
            (".5", 0.5),
            ("1.", 1.0),
            ("3.5e-2", 0.035),
            ("2E3", 2000.0),
            ("1e+2", 100.0),
        ];
        for (src, expect) in vals {
            assert_eq!(eval_str(src, 0.0, 0.0, &[]).unwrap(), expect, "{src}");
        }
    }
}
