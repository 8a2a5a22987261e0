//! Nonlinear triangular systems and the expression language they are
//! defined in.
//!
//! A system of dimension `n` has the form
//!
//! ```text
//! ẋ_i = x_{i+1} + f_i(x_1,…,x_i, u)     i = 1…n−1
//! ẋ_n = f_n(x_1,…,x_n, u) + d(t)
//! y   = x_1
//! ```
//!
//! where each stage nonlinearity `f_i` may depend only on the states up to
//! its own index (triangular structure), `u` is a known input signal, and
//! `d` is a disturbance. `f0` is the nominal model of the last stage that an
//! observer is allowed to use in place of the true `f_n`.
//!
//! All expressions are parsed into [`Expr`] trees and compiled to flat
//! postfix [`Program`]s at construction; a built system is immutable and can
//! be shared freely across threads.

pub mod expr;
pub mod program;

pub use expr::{
    eval as eval_expr, parse as parse_expr, BinOp, Env, EvalError, Expr, Func, ParseError,
    ParseErrorKind, Var, VarSet,
};
pub use program::Program;

use std::ops::Deref;

use crate::scalar::Real;

/// Construction-time validation failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("state dimension must be at least 1")]
    ZeroDimension,
    #[error("f{stage} references x{var}; a stage may only use x1..x{stage} and u")]
    Triangularity { stage: usize, var: usize },
    #[error("f0 references x{var} but the state dimension is {n}")]
    NominalOutOfRange { var: usize, n: usize },
    #[error("in `{field}`: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("state entry {index} is not finite")]
    NonFiniteState { index: usize },
    #[error("state must have at least one entry")]
    EmptyState,
}

/// A fixed-dimension, all-finite state or estimate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec<T>(Vec<T>);

impl<T: Real> StateVec<T> {
    pub fn new(entries: Vec<T>) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::EmptyState);
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteState { index: i });
        }
        Ok(StateVec(entries))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for StateVec<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// The plant: dimension, stage nonlinearities, nominal last-stage model and
/// the two test signals.
#[derive(Debug, Clone)]
pub struct TriangularSystem<T> {
    n: usize,
    f: Vec<Expr>,
    f0: Expr,
    u_signal: Expr,
    d_signal: Expr,
    f_prog: Vec<Program<T>>,
    f0_prog: Program<T>,
    u_prog: Program<T>,
    d_prog: Program<T>,
}

impl<T: Real> TriangularSystem<T> {
    /// Build from already-parsed expressions. `f.len()` fixes the dimension.
    pub fn from_exprs(
        f: Vec<Expr>,
        f0: Expr,
        u_signal: Expr,
        d_signal: Expr,
    ) -> Result<Self, ModelError> {
        let n = f.len();
        if n == 0 {
            return Err(ModelError::ZeroDimension);
        }
        for (idx, fi) in f.iter().enumerate() {
            let stage = idx + 1;
            let mut bad = None;
            fi.for_each_var(&mut |v| {
                if let Var::State(j) = v {
                    if j > stage && bad.is_none() {
                        bad = Some(j);
                    }
                }
            });
            if let Some(var) = bad {
                return Err(ModelError::Triangularity { stage, var });
            }
        }
        let f0_max = f0.max_state_ref();
        if f0_max > n {
            return Err(ModelError::NominalOutOfRange { var: f0_max, n });
        }
        let f_prog = f.iter().map(Program::compile).collect();
        let f0_prog = Program::compile(&f0);
        let u_prog = Program::compile(&u_signal);
        let d_prog = Program::compile(&d_signal);
        Ok(TriangularSystem {
            n,
            f,
            f0,
            u_signal,
            d_signal,
            f_prog,
            f0_prog,
            u_prog,
            d_prog,
        })
    }

    /// Parse stage nonlinearities, nominal model and signals from source
    /// text. State references in the stages are bounds-checked structurally
    /// (so `x3` inside `f2` reports a triangularity violation, not a parse
    /// error); the signals may reference only `t`.
    pub fn parse(
        f: &[impl AsRef<str>],
        f0: &str,
        u_signal: &str,
        d_signal: &str,
    ) -> Result<Self, ModelError> {
        let stage_vars = VarSet::any_states_and_input();
        let parse_field = |field: String, src: &str, vars: VarSet| {
            parse_expr(src, vars).map_err(|source| ModelError::Parse { field, source })
        };
        let f: Vec<Expr> = f
            .iter()
            .enumerate()
            .map(|(i, src)| parse_field(format!("f{}", i + 1), src.as_ref(), stage_vars))
            .collect::<Result<_, _>>()?;
        let f0 = parse_field("f0".into(), f0, stage_vars)?;
        let u_signal = parse_field("u".into(), u_signal, VarSet::time_only())?;
        let d_signal = parse_field("d".into(), d_signal, VarSet::time_only())?;
        Self::from_exprs(f, f0, u_signal, d_signal)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stage nonlinearity `f_i`, 1-based.
    pub fn stage_expr(&self, i: usize) -> &Expr {
        &self.f[i - 1]
    }

    pub fn nominal_expr(&self) -> &Expr {
        &self.f0
    }

    pub fn input_expr(&self) -> &Expr {
        &self.u_signal
    }

    pub fn disturbance_expr(&self) -> &Expr {
        &self.d_signal
    }

    /// Known input `u(t)`.
    pub fn input(&self, t: T) -> Result<T, EvalError> {
        self.u_prog.eval(&Env::new(&[], T::zero(), t))
    }

    /// Disturbance `d(t)`.
    pub fn disturbance(&self, t: T) -> Result<T, EvalError> {
        self.d_prog.eval(&Env::new(&[], T::zero(), t))
    }

    /// `u(t)` with a caller-provided scratch stack.
    pub fn input_with(&self, t: T, stack: &mut Vec<T>) -> Result<T, EvalError> {
        self.u_prog.eval_with(&Env::new(&[], T::zero(), t), stack)
    }

    /// `d(t)` with a caller-provided scratch stack.
    pub fn disturbance_with(&self, t: T, stack: &mut Vec<T>) -> Result<T, EvalError> {
        self.d_prog.eval_with(&Env::new(&[], T::zero(), t), stack)
    }

    /// `f_i(x, u)`, 1-based, with a caller-provided scratch stack.
    pub fn stage_with(
        &self,
        i: usize,
        x: &[T],
        u: T,
        stack: &mut Vec<T>,
    ) -> Result<T, EvalError> {
        self.f_prog[i - 1].eval_with(&Env { x, u, t: T::zero() }, stack)
    }

    /// Nominal model `f0(x, u)` with a caller-provided scratch stack.
    pub fn nominal_with(&self, x: &[T], u: T, stack: &mut Vec<T>) -> Result<T, EvalError> {
        self.f0_prog.eval_with(&Env { x, u, t: T::zero() }, stack)
    }

    /// Plant right-hand side written into `out`; the hot-loop entry point.
    ///
    /// `out[i] = x[i+1] + f_{i+1}(x,u)` for the first `n−1` slots and
    /// `out[n−1] = f_n(x,u) + d(t)`.
    pub fn rhs_into(
        &self,
        x: &[T],
        t: T,
        out: &mut [T],
        stack: &mut Vec<T>,
    ) -> Result<(), EvalError> {
        assert_eq!(x.len(), self.n, "state dimension mismatch");
        assert_eq!(out.len(), self.n, "output dimension mismatch");
        let u = self.u_prog.eval_with(&Env::new(&[], T::zero(), t), stack)?;
        let env = Env { x, u, t: T::zero() };
        for i in 0..self.n - 1 {
            out[i] = x[i + 1] + self.f_prog[i].eval_with(&env, stack)?;
        }
        let d = self.d_prog.eval_with(&Env::new(&[], T::zero(), t), stack)?;
        out[self.n - 1] = self.f_prog[self.n - 1].eval_with(&env, stack)? + d;
        Ok(())
    }

    /// Plant right-hand side as a fresh vector.
    pub fn rhs(&self, x: &StateVec<T>, t: T) -> Result<StateVec<T>, EvalError> {
        let mut out = vec![T::zero(); self.n];
        let mut stack = Vec::new();
        self.rhs_into(x, t, &mut out, &mut stack)?;
        Ok(StateVec(out))
    }
}

/// Free-function form of [`TriangularSystem::rhs`].
pub fn system_rhs<T: Real>(
    sys: &TriangularSystem<T>,
    x: &StateVec<T>,
    t: T,
) -> Result<StateVec<T>, EvalError> {
    sys.rhs(x, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> TriangularSystem<f64> {
        TriangularSystem::parse(
            &["-sin(x1)", "-x1 - 0.02*x2^3 + u"],
            "0",
            "sin(0.35*t)",
            "5*sin(2*t)",
        )
        .unwrap()
    }

    #[test]
    fn rhs_at_origin_is_zero() {
        let sys = example1();
        let x = StateVec::new(vec![0.0, 0.0]).unwrap();
        let dx = sys.rhs(&x, 0.0).unwrap();
        assert_eq!(dx.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn rhs_hand_values() {
        let sys = example1();
        let x = StateVec::new(vec![std::f64::consts::FRAC_PI_2, 1.0]).unwrap();
        let dx = system_rhs(&sys, &x, 0.0).unwrap();
        // ẋ1 = x2 − sin(π/2) = 0; ẋ2 = −π/2 − 0.02 + u(0) + d(0)
        assert!((dx[0]).abs() < 1e-15);
        assert!((dx[1] - (-std::f64::consts::FRAC_PI_2 - 0.02)).abs() < 1e-15);
    }

    #[test]
    fn stage_evaluation_matches_hand_arithmetic() {
        let sys = example1();
        let mut stack = Vec::new();
        // −1 − 0.02·2³ + 0 = −1.16
        let v = sys.stage_with(2, &[1.0, 2.0], 0.0, &mut stack).unwrap();
        assert!((v - (-1.16)).abs() < 1e-15);
        // −1 − 0.02·(−2)³ + 0 = −0.84
        let v = sys.stage_with(2, &[1.0, -2.0], 0.0, &mut stack).unwrap();
        assert!((v - (-0.84)).abs() < 1e-15);
    }

    #[test]
    fn pure_disturbance_integrator() {
        let sys = TriangularSystem::<f64>::parse(&["0"], "0", "0", "1").unwrap();
        let x = StateVec::new(vec![7.5]).unwrap();
        assert_eq!(sys.rhs(&x, 3.0).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn triangularity_is_enforced() {
        let err =
            TriangularSystem::<f64>::parse(&["-sin(x1)", "x3"], "0", "0", "0").unwrap_err();
        assert_eq!(err, ModelError::Triangularity { stage: 2, var: 3 });
        let err = TriangularSystem::<f64>::parse(&["x2", "x1"], "0", "0", "0").unwrap_err();
        assert_eq!(err, ModelError::Triangularity { stage: 1, var: 2 });
    }

    #[test]
    fn nominal_model_bounds() {
        let err = TriangularSystem::<f64>::parse(&["0", "0"], "x3", "0", "0").unwrap_err();
        assert_eq!(err, ModelError::NominalOutOfRange { var: 3, n: 2 });
        assert!(TriangularSystem::<f64>::parse(&["0", "0"], "x2 + u", "0", "0").is_ok());
    }

    #[test]
    fn signals_are_time_only() {
        let err = TriangularSystem::<f64>::parse(&["0"], "0", "x1", "0").unwrap_err();
        assert!(matches!(err, ModelError::Parse { field, .. } if field == "u"));
    }

    #[test]
    fn empty_and_nonfinite_states_rejected() {
        assert_eq!(
            StateVec::<f64>::new(vec![]).unwrap_err(),
            ModelError::EmptyState
        );
        assert_eq!(
            StateVec::new(vec![1.0, f64::NAN]).unwrap_err(),
            ModelError::NonFiniteState { index: 1 }
        );
    }

    #[test]
    fn zero_dimension_rejected() {
        let err = TriangularSystem::<f64>::from_exprs(
            vec![],
            Expr::Num(0.0),
            Expr::Num(0.0),
            Expr::Num(0.0),
        )
        .unwrap_err();
        assert_eq!(err, ModelError::ZeroDimension);
    }

    #[test]
    fn rhs_matches_closed_form_at_random_points() {
        use rand::{Rng, SeedableRng};
        let sys = example1();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut stack = Vec::new();
        let mut out = [0.0f64; 2];
        for _ in 0..100 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let t: f64 = rng.gen_range(0.0..10.0);
            sys.rhs_into(&x, t, &mut out, &mut stack).unwrap();
            let u = (0.35 * t).sin();
            let want = [
                x[1] - x[0].sin(),
                -x[0] - 0.02 * x[1].powi(3) + u + 5.0 * (2.0 * t).sin(),
            ];
            for k in 0..2 {
                let rel = (out[k] - want[k]).abs() / want[k].abs().max(1.0);
                assert!(rel < 1e-12, "component {k}: {} vs {}", out[k], want[k]);
            }
        }
    }
}
