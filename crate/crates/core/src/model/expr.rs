//! Scalar expression language for plant nonlinearities and test signals.
//!
//! Grammar (precedence from loosest to tightest):
//!
//! ```text
//! expr   := term  { ("+" | "-") term }
//! term   := unary { ("*" | "/") unary }
//! unary  := "-" unary | power
//! power  := atom [ "^" unary ]            (right-associative)
//! atom   := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)` while the
//! exponent itself may carry a sign (`x1^-2`). Identifiers are the state
//! variables `x1, x2, …`, the input `u` and the time `t`; which of them are
//! accepted is controlled per call by [`VarSet`]. The function set is fixed:
//! `sin cos tan exp log abs sqrt sign tanh` (`log` is the natural logarithm,
//! `sign` is −1/0/+1).
//!
//! Parsing and printing round-trip: `parse(print(e)) == e` structurally, as
//! long as numeric literals are finite and non-negative (the parser encodes a
//! leading sign as [`Expr::Neg`]).

use std::fmt;

use crate::scalar::Real;

/// Variable reference inside an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// State `x{i}`, 1-based.
    State(usize),
    /// Control input `u`.
    Input,
    /// Time `t`.
    Time,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State(i) => write!(f, "x{i}"),
            Var::Input => write!(f, "u"),
            Var::Time => write!(f, "t"),
        }
    }
}

/// Built-in unary function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Abs,
    Sqrt,
    Sign,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Abs,
        Func::Sqrt,
        Func::Sign,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sign => "sign",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    pub fn apply<T: Real>(self, v: T) -> T {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Abs => v.abs(),
            Func::Sqrt => v.sqrt(),
            Func::Sign => {
                if v > T::zero() {
                    T::one()
                } else if v < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            Func::Tanh => v.tanh(),
        }
    }
}

/// Binary operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree. Literals are stored as `f64` and converted to the target
/// scalar when an expression is compiled or evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Which identifiers an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSet {
    /// Highest admissible state index (`0` forbids states entirely,
    /// `usize::MAX` admits any index — bounds are then checked semantically
    /// by the caller, e.g. the triangularity check).
    pub max_state: usize,
    pub input: bool,
    pub time: bool,
}

impl VarSet {
    /// `x1..xn` and `u` — the variable set of a stage nonlinearity.
    pub fn states_and_input(n: usize) -> Self {
        VarSet { max_state: n, input: true, time: false }
    }

    /// Only `t` — the variable set of a test signal.
    pub fn time_only() -> Self {
        VarSet { max_state: 0, input: false, time: true }
    }

    /// Any state index plus `u`; used when index bounds are deferred to a
    /// later structural check.
    pub fn any_states_and_input() -> Self {
        VarSet { max_state: usize::MAX, input: true, time: false }
    }

    fn admits(&self, var: Var) -> bool {
        match var {
            Var::State(i) => i >= 1 && i <= self.max_state,
            Var::Input => self.input,
            Var::Time => self.time,
        }
    }
}

/// Parse failure, with a byte offset into the source.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at byte {pos}")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected `{0}`")]
    UnexpectedToken(String),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("malformed number literal `{0}`")]
    BadNumber(String),
    #[error("number literal `{0}` does not fit a finite double")]
    NonFiniteNumber(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function `{func}` takes 1 argument, got {got}")]
    ArityMismatch { func: &'static str, got: usize },
}

/// Runtime evaluation failure. Carries the offending subexpression, printed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivByZero(String),
    #[error("log of a non-positive value in `{0}`")]
    LogDomain(String),
    #[error("square root of a negative value in `{0}`")]
    SqrtDomain(String),
    #[error("negative base with non-integer exponent in `{0}`")]
    PowDomain(String),
    #[error("non-finite result in `{0}`")]
    NonFinite(String),
    #[error("expression references x{0} but the state has dimension {1}")]
    StateOutOfRange(usize, usize),
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a, T> {
    pub x: &'a [T],
    pub u: T,
    pub t: T,
}

impl<'a, T: Real> Env<'a, T> {
    pub fn new(x: &'a [T], u: T, t: T) -> Self {
        Env { x, u, t }
    }

    fn lookup(&self, var: Var) -> Result<T, EvalError> {
        match var {
            Var::State(i) => self
                .x
                .get(i - 1)
                .copied()
                .ok_or(EvalError::StateOutOfRange(i, self.x.len())),
            Var::Input => Ok(self.u),
            Var::Time => Ok(self.t),
        }
    }
}

// ---------------------------------------------------------------------------
// lexer
// ---------------------------------------------------------------------------

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
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError {
                    pos: start,
                    kind: ParseErrorKind::BadNumber(text.to_string()),
                })?;
                if !v.is_finite() {
                    return Err(ParseError {
                        pos: start,
                        kind: ParseErrorKind::NonFiniteNumber(text.to_string()),
                    });
                }
                toks.push((Tok::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError {
                    pos: i,
                    kind: ParseErrorKind::UnexpectedChar(c),
                })
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
    vars: VarSet,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError {
                pos: self.here(),
                kind: ParseErrorKind::UnexpectedToken(format!("{} (expected {what})", tok_text(t))),
            }),
            None => Err(ParseError {
                pos: self.end,
                kind: ParseErrorKind::UnexpectedEnd,
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.here();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(*v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                if matches!(self.peek(), Some(Tok::LParen)) {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(Tok::Comma)) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(&Tok::RParen, "`)`")?;
                    let func = Func::from_name(&name).ok_or(ParseError {
                        pos,
                        kind: ParseErrorKind::UnknownFunction(name.clone()),
                    })?;
                    if args.len() != 1 {
                        return Err(ParseError {
                            pos,
                            kind: ParseErrorKind::ArityMismatch {
                                func: func.name(),
                                got: args.len(),
                            },
                        });
                    }
                    Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
                } else {
                    let var = parse_var(&name).ok_or_else(|| ParseError {
                        pos,
                        kind: ParseErrorKind::UnknownVariable(name.clone()),
                    })?;
                    if !self.vars.admits(var) {
                        return Err(ParseError {
                            pos,
                            kind: ParseErrorKind::UnknownVariable(name),
                        });
                    }
                    Ok(Expr::Var(var))
                }
            }
            Some(t) => Err(ParseError {
                pos,
                kind: ParseErrorKind::UnexpectedToken(tok_text(t)),
            }),
            None => Err(ParseError {
                pos: self.end,
                kind: ParseErrorKind::UnexpectedEnd,
            }),
        }
    }
}

fn tok_text(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("{v}"),
        Tok::Ident(s) => s.clone(),
        Tok::Plus => "+".into(),
        Tok::Minus => "-".into(),
        Tok::Star => "*".into(),
        Tok::Slash => "/".into(),
        Tok::Caret => "^".into(),
        Tok::LParen => "(".into(),
        Tok::RParen => ")".into(),
        Tok::Comma => ",".into(),
    }
}

fn parse_var(name: &str) -> Option<Var> {
    match name {
        "u" => Some(Var::Input),
        "t" => Some(Var::Time),
        _ => {
            let digits = name.strip_prefix('x')?;
            if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit())
            {
                return None;
            }
            digits.parse::<usize>().ok().map(Var::State)
        }
    }
}

/// Parse `src` against the admissible variable set.
pub fn parse(src: &str, vars: VarSet) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks: &toks, pos: 0, end: src.len(), vars };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(ParseError {
            pos: p.here(),
            kind: ParseErrorKind::UnexpectedToken(tok_text(t)),
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// printing
// ---------------------------------------------------------------------------

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
    }
}

fn fmt_expr(e: &Expr, out: &mut String) {
    let paren = |inner: &Expr, cut: u8, out: &mut String| {
        if prec(inner) < cut {
            out.push('(');
            fmt_expr(inner, out);
            out.push(')');
        } else {
            fmt_expr(inner, out);
        }
    };
    match e {
        Expr::Num(v) => {
            use std::fmt::Write;
            let _ = write!(out, "{v}");
        }
        Expr::Var(v) => {
            use std::fmt::Write;
            let _ = write!(out, "{v}");
        }
        Expr::Neg(inner) => {
            out.push('-');
            paren(inner, 3, out);
        }
        Expr::Bin(op @ (BinOp::Add | BinOp::Sub), a, b) => {
            paren(a, 1, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            // keep left associativity on re-parse
            paren(b, 2, out);
        }
        Expr::Bin(op @ (BinOp::Mul | BinOp::Div), a, b) => {
            paren(a, 2, out);
            out.push_str(op.symbol());
            paren(b, 3, out);
        }
        Expr::Bin(BinOp::Pow, a, b) => {
            paren(a, 5, out);
            out.push('^');
            // the parser admits a bare unary minus in the exponent, but a
            // parenthesised exponent re-parses unambiguously at any depth
            paren(b, 5, out);
        }
        Expr::Call(f, arg) => {
            out.push_str(f.name());
            out.push('(');
            fmt_expr(arg, out);
            out.push(')');
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        fmt_expr(self, &mut s);
        f.write_str(&s)
    }
}

// ---------------------------------------------------------------------------
// structural queries
// ---------------------------------------------------------------------------

impl Expr {
    /// Visit every variable reference.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(e) => e.for_each_var(f),
            Expr::Bin(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Expr::Call(_, a) => a.for_each_var(f),
        }
    }

    /// Largest state index referenced, or 0 if none.
    pub fn max_state_ref(&self) -> usize {
        let mut max = 0;
        self.for_each_var(&mut |v| {
            if let Var::State(i) = v {
                max = max.max(i);
            }
        });
        max
    }
}

// ---------------------------------------------------------------------------
// reference evaluation (tree walk)
// ---------------------------------------------------------------------------

/// Evaluate by walking the tree. This is the reference semantics; the
/// compiled [`super::program::Program`] must agree with it bit-for-bit on
/// domain decisions and to floating-point roundoff on values.
pub fn eval<T: Real>(e: &Expr, env: &Env<T>) -> Result<T, EvalError> {
    let v = eval_inner(e, env)?;
    if !v.is_finite() {
        return Err(EvalError::NonFinite(e.to_string()));
    }
    Ok(v)
}

fn eval_inner<T: Real>(e: &Expr, env: &Env<T>) -> Result<T, EvalError> {
    match e {
        Expr::Num(v) => Ok(T::from_f64(*v)),
        Expr::Var(v) => env.lookup(*v),
        Expr::Neg(inner) => Ok(-eval_inner(inner, env)?),
        Expr::Bin(op, a, b) => {
            let va = eval_inner(a, env)?;
            let vb = eval_inner(b, env)?;
            match op {
                BinOp::Add => Ok(va + vb),
                BinOp::Sub => Ok(va - vb),
                BinOp::Mul => Ok(va * vb),
                BinOp::Div => {
                    if vb == T::zero() {
                        Err(EvalError::DivByZero(e.to_string()))
                    } else {
                        Ok(va / vb)
                    }
                }
                BinOp::Pow => pow_checked(va, vb).map_err(|k| k.attach(e)),
            }
        }
        Expr::Call(f, arg) => {
            let v = eval_inner(arg, env)?;
            match f {
                Func::Log if v <= T::zero() => Err(EvalError::LogDomain(e.to_string())),
                Func::Sqrt if v < T::zero() => Err(EvalError::SqrtDomain(e.to_string())),
                _ => Ok(f.apply(v)),
            }
        }
    }
}

/// Domain classification for `a^b`, shared by both evaluators.
pub(crate) enum PowErr {
    Domain,
    DivByZero,
}

impl PowErr {
    fn attach(self, e: &Expr) -> EvalError {
        match self {
            PowErr::Domain => EvalError::PowDomain(e.to_string()),
            PowErr::DivByZero => EvalError::DivByZero(e.to_string()),
        }
    }

    pub(crate) fn attach_str(self, s: &str) -> EvalError {
        match self {
            PowErr::Domain => EvalError::PowDomain(s.to_string()),
            PowErr::DivByZero => EvalError::DivByZero(s.to_string()),
        }
    }
}

/// `a^b` with integer exponents computed by repeated multiplication (sign
/// preserving on negative bases) and real exponents via `exp(b·ln a)`.
pub(crate) fn pow_checked<T: Real>(a: T, b: T) -> Result<T, PowErr> {
    if b.fract() == T::zero() && b.abs() <= T::from_f64(2_147_483_647.0) {
        let k = <i32 as num_traits::NumCast>::from(b).unwrap_or(0);
        if a == T::zero() && k < 0 {
            return Err(PowErr::DivByZero);
        }
        return Ok(a.powi(k));
    }
    if a < T::zero() {
        return Err(PowErr::Domain);
    }
    if a == T::zero() && b < T::zero() {
        return Err(PowErr::DivByZero);
    }
    Ok(a.powf(b))
}
