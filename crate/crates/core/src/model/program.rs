//! Postfix compilation of [`Expr`](super::expr::Expr) trees.
//!
//! Right-hand-side expressions are evaluated millions of times per run, so
//! they are flattened once into a postfix instruction vector and executed on
//! a reusable value stack — no recursion, no per-step allocation. Integer
//! literal exponents (including negated ones) are folded into a dedicated
//! instruction so `x^3` costs one `powi`, never a `powf`.
//!
//! Semantics match the tree-walk evaluator exactly: same domain checks, same
//! error classification, same final finiteness check.

use crate::scalar::Real;

use super::expr::{pow_checked, Env, EvalError, Expr, Func, BinOp};

#[derive(Debug, Clone)]
enum Instr<T> {
    Push(T),
    /// 0-based state slot.
    LoadX(usize),
    LoadU,
    LoadT,
    Neg,
    Add,
    Sub,
    Mul,
    /// Payloads on fallible instructions index into `Program::spans`.
    Div(u32),
    PowInt(i32, u32),
    Pow(u32),
    Call(Func, u32),
}

/// A compiled expression.
#[derive(Debug, Clone)]
pub struct Program<T> {
    instrs: Vec<Instr<T>>,
    /// Pretty-printed subexpressions for error reporting.
    spans: Vec<String>,
    source: String,
    max_stack: usize,
    max_state: usize,
}

impl<T: Real> Program<T> {
    pub fn compile(expr: &Expr) -> Self {
        let mut p = Program {
            instrs: Vec::new(),
            spans: Vec::new(),
            source: expr.to_string(),
            max_stack: 0,
            max_state: expr.max_state_ref(),
        };
        let mut depth = 0usize;
        p.emit(expr, &mut depth);
        p
    }

    /// Printed form of the compiled expression.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Largest state index referenced (1-based), 0 if none.
    pub fn max_state_ref(&self) -> usize {
        self.max_state
    }

    fn span(&mut self, e: &Expr) -> u32 {
        let s = e.to_string();
        if let Some(i) = self.spans.iter().position(|x| *x == s) {
            return i as u32;
        }
        self.spans.push(s);
        (self.spans.len() - 1) as u32
    }

    fn push_instr(&mut self, i: Instr<T>, depth: &mut usize, delta: isize) {
        self.instrs.push(i);
        *depth = depth.checked_add_signed(delta).expect("stack underflow in compile");
        self.max_stack = self.max_stack.max(*depth);
    }

    fn emit(&mut self, e: &Expr, depth: &mut usize) {
        match e {
            Expr::Num(v) => self.push_instr(Instr::Push(T::from_f64(*v)), depth, 1),
            Expr::Var(v) => match v {
                super::expr::Var::State(i) => self.push_instr(Instr::LoadX(i - 1), depth, 1),
                super::expr::Var::Input => self.push_instr(Instr::LoadU, depth, 1),
                super::expr::Var::Time => self.push_instr(Instr::LoadT, depth, 1),
            },
            Expr::Neg(inner) => {
                self.emit(inner, depth);
                self.push_instr(Instr::Neg, depth, 0);
            }
            Expr::Bin(BinOp::Pow, base, exp) => {
                if let Some(k) = int_literal(exp) {
                    self.emit(base, depth);
                    let s = self.span(e);
                    self.push_instr(Instr::PowInt(k, s), depth, 0);
                } else {
                    self.emit(base, depth);
                    self.emit(exp, depth);
                    let s = self.span(e);
                    self.push_instr(Instr::Pow(s), depth, -1);
                }
            }
            Expr::Bin(op, a, b) => {
                self.emit(a, depth);
                self.emit(b, depth);
                match op {
                    BinOp::Add => self.push_instr(Instr::Add, depth, -1),
                    BinOp::Sub => self.push_instr(Instr::Sub, depth, -1),
                    BinOp::Mul => self.push_instr(Instr::Mul, depth, -1),
                    BinOp::Div => {
                        let s = self.span(e);
                        self.push_instr(Instr::Div(s), depth, -1);
                    }
                    BinOp::Pow => unreachable!("handled above"),
                }
            }
            Expr::Call(f, arg) => {
                self.emit(arg, depth);
                let s = self.span(e);
                self.push_instr(Instr::Call(*f, s), depth, 0);
            }
        }
    }

    /// Evaluate with a caller-provided stack (cleared on entry). The stack
    /// grows to the program's fixed maximum depth on first use and is never
    /// reallocated afterwards.
    pub fn eval_with(&self, env: &Env<T>, stack: &mut Vec<T>) -> Result<T, EvalError> {
        stack.clear();
        stack.reserve(self.max_stack);
        for instr in &self.instrs {
            match instr {
                Instr::Push(v) => stack.push(*v),
                Instr::LoadX(i) => {
                    let v = env
                        .x
                        .get(*i)
                        .copied()
                        .ok_or(EvalError::StateOutOfRange(*i + 1, env.x.len()))?;
                    stack.push(v);
                }
                Instr::LoadU => stack.push(env.u),
                Instr::LoadT => stack.push(env.t),
                Instr::Neg => {
                    let a = stack.last_mut().expect("stack underflow");
                    *a = -*a;
                }
                Instr::Add => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.last_mut().expect("stack underflow");
                    *a += b;
                }
                Instr::Sub => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.last_mut().expect("stack underflow");
                    *a -= b;
                }
                Instr::Mul => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.last_mut().expect("stack underflow");
                    *a *= b;
                }
                Instr::Div(s) => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.last_mut().expect("stack underflow");
                    if b == T::zero() {
                        return Err(EvalError::DivByZero(self.spans[*s as usize].clone()));
                    }
                    *a /= b;
                }
                Instr::PowInt(k, s) => {
                    let a = stack.last_mut().expect("stack underflow");
                    if *a == T::zero() && *k < 0 {
                        return Err(EvalError::DivByZero(self.spans[*s as usize].clone()));
                    }
                    *a = a.powi(*k);
                }
                Instr::Pow(s) => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.last_mut().expect("stack underflow");
                    *a = pow_checked(*a, b)
                        .map_err(|k| k.attach_str(&self.spans[*s as usize]))?;
                }
                Instr::Call(f, s) => {
                    let a = stack.last_mut().expect("stack underflow");
                    match f {
                        Func::Log if *a <= T::zero() => {
                            return Err(EvalError::LogDomain(self.spans[*s as usize].clone()))
                        }
                        Func::Sqrt if *a < T::zero() => {
                            return Err(EvalError::SqrtDomain(self.spans[*s as usize].clone()))
                        }
                        _ => *a = f.apply(*a),
                    }
                }
            }
        }
        let v = stack.pop().expect("empty program");
        if !v.is_finite() {
            return Err(EvalError::NonFinite(self.source.clone()));
        }
        Ok(v)
    }

    /// Convenience wrapper allocating a fresh stack.
    pub fn eval(&self, env: &Env<T>) -> Result<T, EvalError> {
        let mut stack = Vec::with_capacity(self.max_stack);
        self.eval_with(env, &mut stack)
    }
}

/// Integer i32 literal (possibly negated) usable as a `powi` exponent.
fn int_literal(e: &Expr) -> Option<i32> {
    match e {
        Expr::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => Some(*v as i32),
        Expr::Neg(inner) => int_literal(inner).and_then(i32::checked_neg),
        _ => None,
    }
}

/// Compile-and-evaluate helper used in tests and one-off evaluations.
pub fn eval_compiled<T: Real>(expr: &Expr, env: &Env<T>) -> Result<T, EvalError> {
    Program::compile(expr).eval(env)
}

#[cfg(test)]
mod tests {
    use super::super::expr::{eval, parse, VarSet};
    use super::*;

    fn both(src: &str, x: &[f64], u: f64, t: f64) -> (Result<f64, EvalError>, Result<f64, EvalError>) {
        let e = parse(src, VarSet { max_state: 9, input: true, time: true }).expect(src);
        let env = Env::new(x, u, t);
        (eval(&e, &env), Program::compile(&e).eval(&env))
    }

    #[test]
    fn compiled_matches_tree_walk_on_frozen_examples() {
        for (src, x, u, t) in [
            ("x2 - sin(x1)", vec![0.5, 2.0], 0.0, 0.0),
            ("-x1 - 0.02*x2^3 + u", vec![1.0, -2.0], 0.0, 0.0),
            ("5*sin(2*t)", vec![], 0.0, 0.7),
            ("sin(0.35*t)", vec![], 0.0, 3.0),
            ("x1^-2 + 2^x2", vec![3.0, 4.0], 0.0, 0.0),
            ("tanh(x1)*exp(-t) + sqrt(abs(u))", vec![0.3], -4.0, 2.0),
        ] {
            let (a, b) = both(src, &x, u, t);
            let (a, b) = (a.expect(src), b.expect(src));
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0), "{src}: {a} vs {b}");
        }
    }

    #[test]
    fn frozen_oracle_values() {
        let (_, v) = both("x2 - sin(x1)", &[0.5, 2.0], 0.0, 0.0);
        assert!((v.unwrap() - 1.520574461395797).abs() < 1e-15);
        let (_, v) = both("5*sin(2*t)", &[], 0.0, 0.25);
        assert!((v.unwrap() - 5.0 * (0.5f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn integer_exponents_fold_to_powi() {
        let e = parse("x1^3 + x1^-2 + x1^2.5", VarSet::states_and_input(1)).unwrap();
        let prog = Program::<f64>::compile(&e);
        let n_powi = prog
            .instrs
            .iter()
            .filter(|i| matches!(i, Instr::PowInt(..)))
            .count();
        let n_powf = prog.instrs.iter().filter(|i| matches!(i, Instr::Pow(_))).count();
        assert_eq!((n_powi, n_powf), (2, 1));
    }

    #[test]
    fn domain_errors_match_tree_walk() {
        let cases: &[(&str, &[f64])] = &[
            ("1/(x1 - 1)", &[1.0]),
            ("log(x1)", &[0.0]),
            ("sqrt(x1)", &[-1.0]),
            ("x1^0.5", &[-2.0]),
            ("x1^-1", &[0.0]),
            ("exp(x1)", &[1e9]),
        ];
        for (src, x) in cases {
            let (a, b) = both(src, x, 0.0, 0.0);
            assert_eq!(a.unwrap_err(), b.unwrap_err(), "{src}");
        }
    }

    #[test]
    fn state_bounds_checked_at_runtime() {
        let e = parse("x3", VarSet::any_states_and_input()).unwrap();
        let err = Program::<f64>::compile(&e).eval(&Env::new(&[1.0, 2.0], 0.0, 0.0));
        assert_eq!(err.unwrap_err(), EvalError::StateOutOfRange(3, 2));
    }

    #[test]
    fn stack_reuse_is_stable() {
        let e = parse("(x1 + x2)*(x1 - x2) + sin(x1*x2)", VarSet::states_and_input(2)).unwrap();
        let prog = Program::<f64>::compile(&e);
        let mut stack = Vec::new();
        let mut last = 0.0;
        for i in 0..100 {
            let x = [i as f64 * 0.01, 1.0 - i as f64 * 0.01];
            last = prog.eval_with(&Env::new(&x, 0.0, 0.0), &mut stack).unwrap();
        }
        let x = [0.99f64, 0.01];
        assert_eq!(last, (x[0] + x[1]) * (x[0] - x[1]) + (x[0] * x[1]).sin());
    }
}
