//! Observer right-hand sides: prescribed-time, constant high-gain, and the
//! disturbance-estimating extended prescribed-time variant.
//!
//! All three share the output-injection template
//!
//! ```text
//! x̂̇_i = x̂_{i+1} + f_i(x̂_1…x̂_i, u) + g_i(t)·(y − x̂_1)     i = 1…n−1
//! x̂̇_n = f0(x̂, u)                  + g_n(t)·(y − x̂_1)
//! ```
//!
//! and differ in the gain schedule `g_i(t)` and, for the extended variant,
//! in an extra integrator that estimates the lumped disturbance acting on
//! the last stage. The prescribed-time schedule is `g_i = L_i·μ(t)^{i(1+m)}`
//! — finite-horizon, growing without bound as t → T (saturating at the μ
//! cap); the high-gain schedule is the constant `g_i = α_i/ε^i`.

use crate::model::{EvalError, StateVec, TriangularSystem};
use crate::scalar::Real;
use crate::timescale::TimeScale;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObserverError {
    #[error("at least one gain is required")]
    NoGains,
    #[error("gain {index} is not finite")]
    NonFiniteGain { index: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    Epsilon(f64),
    #[error("extended observer needs at least 2 gains (n plant stages plus the disturbance state), got {got}")]
    ExtendedGainCount { got: usize },
    #[error("observer is designed for a dimension-{expected} plant, got dimension {got}")]
    PlantDim { expected: usize, got: usize },
    #[error("estimate has dimension {got}, expected {expected}")]
    EstimateDim { expected: usize, got: usize },
    #[error("joint state has dimension {got}, expected {expected}")]
    JointDim { expected: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn check_gains<T: Real>(l: &[T]) -> Result<(), ObserverError> {
    if l.is_empty() {
        return Err(ObserverError::NoGains);
    }
    if let Some(index) = l.iter().position(|v| !v.is_finite()) {
        return Err(ObserverError::NonFiniteGain { index });
    }
    Ok(())
}

/// Prescribed-time observer: gains `L_i·μ^{i(1+m)}`, one per plant stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PtObserverSpec<T> {
    l: Vec<T>,
    ts: TimeScale<T>,
}

impl<T: Real> PtObserverSpec<T> {
    pub fn new(l: Vec<T>, ts: TimeScale<T>) -> Result<Self, ObserverError> {
        check_gains(&l)?;
        Ok(PtObserverSpec { l, ts })
    }

    pub fn gains(&self) -> &[T] {
        &self.l
    }

    pub fn timescale(&self) -> &TimeScale<T> {
        &self.ts
    }
}

/// Which power of ε divides the high-gain coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HgGainPower {
    /// `α_i/ε^i` — the classical schedule; recovers the expected peaking
    /// behavior at small ε.
    #[default]
    Standard,
    /// `α_i/ε` for every stage.
    Linear,
}

/// Constant high-gain observer: gains `α_i/ε^i` (or `α_i/ε`).
#[derive(Debug, Clone, PartialEq)]
pub struct HgObserverSpec<T> {
    alpha: Vec<T>,
    epsilon: T,
    gain_power: HgGainPower,
}

impl<T: Real> HgObserverSpec<T> {
    pub fn new(alpha: Vec<T>, epsilon: T) -> Result<Self, ObserverError> {
        Self::with_gain_power(alpha, epsilon, HgGainPower::Standard)
    }

    pub fn with_gain_power(
        alpha: Vec<T>,
        epsilon: T,
        gain_power: HgGainPower,
    ) -> Result<Self, ObserverError> {
        check_gains(&alpha)?;
        if !(epsilon.is_finite() && epsilon > T::zero()) {
            return Err(ObserverError::Epsilon(
                num_traits::ToPrimitive::to_f64(&epsilon).unwrap_or(f64::NAN),
            ));
        }
        Ok(HgObserverSpec { alpha, epsilon, gain_power })
    }

    pub fn gains(&self) -> &[T] {
        &self.alpha
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn gain_power(&self) -> HgGainPower {
        self.gain_power
    }

    /// Implemented constant gain of stage `i` (1-based).
    pub fn stage_gain(&self, i: usize) -> T {
        let div = match self.gain_power {
            HgGainPower::Standard => self.epsilon.powi(i as i32),
            HgGainPower::Linear => self.epsilon,
        };
        self.alpha[i - 1] / div
    }
}

/// Extended prescribed-time observer: n+1 gains; the extra state estimates
/// the lumped disturbance on the last plant stage, and the last plant stage
/// uses the full model `f_n` instead of the nominal `f0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPtObserverSpec<T> {
    l: Vec<T>,
    ts: TimeScale<T>,
}

impl<T: Real> ExtendedPtObserverSpec<T> {
    pub fn new(l: Vec<T>, ts: TimeScale<T>) -> Result<Self, ObserverError> {
        check_gains(&l)?;
        if l.len() < 2 {
            return Err(ObserverError::ExtendedGainCount { got: l.len() });
        }
        Ok(ExtendedPtObserverSpec { l, ts })
    }

    pub fn gains(&self) -> &[T] {
        &self.l
    }

    pub fn timescale(&self) -> &TimeScale<T> {
        &self.ts
    }
}

/// Any of the three observer variants.
#[derive(Debug, Clone, PartialEq)]
pub enum Observer<T> {
    PrescribedTime(PtObserverSpec<T>),
    HighGain(HgObserverSpec<T>),
    ExtendedPrescribedTime(ExtendedPtObserverSpec<T>),
}

impl<T: Real> Observer<T> {
    /// Plant dimension the gain vector was designed for.
    pub fn plant_dim(&self) -> usize {
        match self {
            Observer::PrescribedTime(s) => s.l.len(),
            Observer::HighGain(s) => s.alpha.len(),
            Observer::ExtendedPrescribedTime(s) => s.l.len() - 1,
        }
    }

    /// Observer state dimension: n, or n+1 for the extended variant.
    pub fn state_dim(&self) -> usize {
        match self {
            Observer::PrescribedTime(s) => s.l.len(),
            Observer::HighGain(s) => s.alpha.len(),
            Observer::ExtendedPrescribedTime(s) => s.l.len(),
        }
    }

    /// Whether the variant carries a disturbance-estimate state.
    pub fn estimates_disturbance(&self) -> bool {
        matches!(self, Observer::ExtendedPrescribedTime(_))
    }

    pub fn timescale(&self) -> Option<&TimeScale<T>> {
        match self {
            Observer::PrescribedTime(s) => Some(&s.ts),
            Observer::HighGain(_) => None,
            Observer::ExtendedPrescribedTime(s) => Some(&s.ts),
        }
    }

    /// μ(t) for the trajectory record; constant-gain observers report 1.
    pub fn mu_sample(&self, t: T) -> T {
        self.timescale().map_or_else(T::one, |ts| ts.mu(t))
    }

    fn check_dims(&self, sys_dim: usize, xhat_len: usize) -> Result<(), ObserverError> {
        if self.plant_dim() != sys_dim {
            return Err(ObserverError::PlantDim { expected: self.plant_dim(), got: sys_dim });
        }
        if xhat_len != self.state_dim() {
            return Err(ObserverError::EstimateDim {
                expected: self.state_dim(),
                got: xhat_len,
            });
        }
        Ok(())
    }

    /// Observer right-hand side written into `out`; the hot-loop entry
    /// point. `y` is the measurement fed to the observer — the caller
    /// decides whether it is the clean output `x₁` or a noisy sample.
    pub fn rhs_into(
        &self,
        sys: &TriangularSystem<T>,
        xhat: &[T],
        y: T,
        t: T,
        out: &mut [T],
        stack: &mut Vec<T>,
    ) -> Result<(), ObserverError> {
        let n = sys.dim();
        self.check_dims(n, xhat.len())?;
        assert_eq!(out.len(), xhat.len(), "output dimension mismatch");
        let u = sys.input_with(t, stack)?;
        let e1 = y - xhat[0];
        match self {
            Observer::PrescribedTime(spec) => {
                let p = spec.ts.mu(t).powf(T::one() + spec.ts.m());
                for i in 0..n - 1 {
                    out[i] = xhat[i + 1]
                        + sys.stage_with(i + 1, xhat, u, stack)?
                        + spec.l[i] * p.powi(i as i32 + 1) * e1;
                }
                out[n - 1] = sys.nominal_with(xhat, u, stack)? + spec.l[n - 1] * p.powi(n as i32) * e1;
            }
            Observer::HighGain(spec) => {
                for i in 0..n - 1 {
                    out[i] = xhat[i + 1]
                        + sys.stage_with(i + 1, xhat, u, stack)?
                        + spec.stage_gain(i + 1) * e1;
                }
                out[n - 1] = sys.nominal_with(xhat, u, stack)? + spec.stage_gain(n) * e1;
            }
            Observer::ExtendedPrescribedTime(spec) => {
                let p = spec.ts.mu(t).powf(T::one() + spec.ts.m());
                for i in 0..n - 1 {
                    out[i] = xhat[i + 1]
                        + sys.stage_with(i + 1, xhat, u, stack)?
                        + spec.l[i] * p.powi(i as i32 + 1) * e1;
                }
                // last plant stage: full model plus the disturbance estimate
                out[n - 1] = sys.stage_with(n, &xhat[..n], u, stack)?
                    + xhat[n]
                    + spec.l[n - 1] * p.powi(n as i32) * e1;
                // disturbance state: pure injection
                out[n] = spec.l[n] * p.powi(n as i32 + 1) * e1;
            }
        }
        Ok(())
    }

    /// Observer right-hand side as a fresh vector.
    pub fn rhs(
        &self,
        sys: &TriangularSystem<T>,
        xhat: &StateVec<T>,
        y: T,
        t: T,
    ) -> Result<StateVec<T>, ObserverError> {
        let mut out = vec![T::zero(); xhat.dim()];
        let mut stack = Vec::new();
        self.rhs_into(sys, xhat, y, t, &mut out, &mut stack)?;
        Ok(StateVec::new(out).expect("rhs produced empty state"))
    }
}

/// Plant state and estimate, stacked for simultaneous integration.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState<T> {
    pub x: StateVec<T>,
    pub xhat: StateVec<T>,
}

/// Free-function forms of the per-variant right-hand sides.
pub fn pt_observer_rhs<T: Real>(
    sys: &TriangularSystem<T>,
    spec: &PtObserverSpec<T>,
    xhat: &StateVec<T>,
    y: T,
    t: T,
) -> Result<StateVec<T>, ObserverError> {
    Observer::PrescribedTime(spec.clone()).rhs(sys, xhat, y, t)
}

pub fn hg_observer_rhs<T: Real>(
    sys: &TriangularSystem<T>,
    spec: &HgObserverSpec<T>,
    xhat: &StateVec<T>,
    y: T,
    t: T,
) -> Result<StateVec<T>, ObserverError> {
    Observer::HighGain(spec.clone()).rhs(sys, xhat, y, t)
}

pub fn extended_pt_observer_rhs<T: Real>(
    sys: &TriangularSystem<T>,
    spec: &ExtendedPtObserverSpec<T>,
    xhat: &StateVec<T>,
    y: T,
    t: T,
) -> Result<StateVec<T>, ObserverError> {
    Observer::ExtendedPrescribedTime(spec.clone()).rhs(sys, xhat, y, t)
}

/// Joint plant+observer right-hand side into a caller buffer. The joint
/// state layout is `[x | x̂]`; `y` is the measurement handed to the
/// observer.
pub fn joint_rhs_into<T: Real>(
    sys: &TriangularSystem<T>,
    obs: &Observer<T>,
    s: &[T],
    y: T,
    t: T,
    out: &mut [T],
    stack: &mut Vec<T>,
) -> Result<(), ObserverError> {
    let n = sys.dim();
    let k = obs.state_dim();
    if s.len() != n + k {
        return Err(ObserverError::JointDim { expected: n + k, got: s.len() });
    }
    assert_eq!(out.len(), n + k, "output dimension mismatch");
    sys.rhs_into(&s[..n], t, &mut out[..n], stack)?;
    obs.rhs_into(sys, &s[n..], y, t, &mut out[n..], stack)?;
    Ok(())
}

/// Joint right-hand side with the clean output `y = x₁`.
pub fn joint_rhs<T: Real>(
    sys: &TriangularSystem<T>,
    obs: &Observer<T>,
    state: &JointState<T>,
    t: T,
) -> Result<JointState<T>, ObserverError> {
    let n = sys.dim();
    if state.x.dim() != n {
        return Err(ObserverError::JointDim { expected: n, got: state.x.dim() });
    }
    let k = obs.state_dim();
    let mut s = Vec::with_capacity(n + k);
    s.extend_from_slice(&state.x);
    s.extend_from_slice(&state.xhat);
    if s.len() != n + k {
        return Err(ObserverError::JointDim { expected: n + k, got: s.len() });
    }
    let mut out = vec![T::zero(); n + k];
    let mut stack = Vec::new();
    joint_rhs_into(sys, obs, &s, state.x[0], t, &mut out, &mut stack)?;
    let xhat_dot = out.split_off(n);
    Ok(JointState {
        x: StateVec::new(out).expect("plant rhs produced empty state"),
        xhat: StateVec::new(xhat_dot).expect("observer rhs produced empty state"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TriangularSystem;
    use crate::timescale::TimeScale;

    fn example1() -> TriangularSystem<f64> {
        TriangularSystem::parse(
            &["-sin(x1)", "-x1 - 0.02*x2^3 + u"],
            "0",
            "sin(0.35*t)",
            "5*sin(2*t)",
        )
        .unwrap()
    }

    fn example1_pt() -> PtObserverSpec<f64> {
        PtObserverSpec::new(vec![3.0, 2.0], TimeScale::new(0.5, 0.1, 1e10).unwrap()).unwrap()
    }

    fn example2_ext() -> ExtendedPtObserverSpec<f64> {
        ExtendedPtObserverSpec::new(
            vec![6.0, 11.0, 6.0],
            TimeScale::new(1.0, 0.1, 1e10).unwrap(),
        )
        .unwrap()
    }

    fn sv(v: &[f64]) -> StateVec<f64> {
        StateVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pt_rhs_hand_values() {
        let sys = example1();
        let spec = example1_pt();
        let z = pt_observer_rhs(&sys, &spec, &sv(&[0.0, 0.0]), 0.0, 0.0).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0]);

        // μ = 1 at t = 0: plain Luenberger gains
        let z = pt_observer_rhs(&sys, &spec, &sv(&[0.0, 0.0]), 1.0, 0.0).unwrap();
        assert_eq!(z.as_slice(), &[3.0, 2.0]);

        // μ = 2 at t = T/2: frozen 3·2^{1.1} and 2·2^{2.2}
        let z = pt_observer_rhs(&sys, &spec, &sv(&[0.0, 0.0]), 1.0, 0.25).unwrap();
        assert!((z[0] - 6.430640775217759).abs() < 1e-12, "{}", z[0]);
        assert!((z[1] - 9.18958683997628).abs() < 1e-12, "{}", z[1]);
    }

    #[test]
    fn hg_rhs_hand_values() {
        let sys = example1();
        let spec = HgObserverSpec::new(vec![3.0, 2.0], 0.01).unwrap();
        let z = hg_observer_rhs(&sys, &spec, &sv(&[0.0, 0.0]), 0.0, 0.0).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0]);
        let z = hg_observer_rhs(&sys, &spec, &sv(&[0.0, 0.0]), 1.0, 0.0).unwrap();
        assert_eq!(z.as_slice(), &[300.0, 20000.0]);

        let unit = HgObserverSpec::new(vec![3.0, 2.0], 1.0).unwrap();
        let z = hg_observer_rhs(&sys, &unit, &sv(&[0.0, 0.0]), 1.0, 0.0).unwrap();
        assert_eq!(z.as_slice(), &[3.0, 2.0]);

        let linear =
            HgObserverSpec::with_gain_power(vec![3.0, 2.0], 0.01, HgGainPower::Linear).unwrap();
        let z = hg_observer_rhs(&sys, &linear, &sv(&[0.0, 0.0]), 1.0, 0.0).unwrap();
        assert_eq!(z.as_slice(), &[300.0, 200.0]);
    }

    #[test]
    fn extended_rhs_hand_values() {
        let sys = example1();
        let spec = example2_ext();
        let z = extended_pt_observer_rhs(&sys, &spec, &sv(&[0.0, 0.0, 0.0]), 0.0, 0.0).unwrap();
        assert_eq!(z.as_slice(), &[0.0, 0.0, 0.0]);
        let z = extended_pt_observer_rhs(&sys, &spec, &sv(&[0.0, 0.0, 0.0]), 1.0, 0.0).unwrap();
        assert_eq!(z.as_slice(), &[6.0, 11.0, 6.0]);
        let z = extended_pt_observer_rhs(&sys, &spec, &sv(&[0.0, 1.0, 0.0]), 0.0, 0.0).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-15);
        assert!((z[1] - (-0.02)).abs() < 1e-15);
        assert_eq!(z[2], 0.0);
    }

    #[test]
    fn gain_schedule_matches_timescale() {
        let spec = example1_pt();
        let ts = *spec.timescale();
        let sys = example1();
        let obs = Observer::PrescribedTime(spec.clone());
        for &t in &[0.0, 0.1, 0.25, 0.4, 0.4999] {
            // y − x̂₁ = 1 and x̂ = 0 isolates the injection term per stage
            let z = obs.rhs(&sys, &sv(&[0.0, 0.0]), 1.0, t).unwrap();
            for i in 1..=2usize {
                let injected = if i == 1 { z[0] - 0.0 } else { z[1] };
                let want = spec.gains()[i - 1] * ts.mu(t).powf(1.1 * i as f64);
                assert!(
                    (injected - want).abs() / want.abs() < 1e-12,
                    "t={t} i={i}: {injected} vs {want}"
                );
            }
        }
    }

    #[test]
    fn output_injection_vanishes_when_y_matches() {
        let sys = example1();
        let xhat = sv(&[0.37, -1.2]);
        let u = sys.input(0.3).unwrap();
        let mut stack = Vec::new();
        let open_loop = [
            xhat[1] + sys.stage_with(1, &xhat, u, &mut stack).unwrap(),
            sys.nominal_with(&xhat, u, &mut stack).unwrap(),
        ];
        for obs in [
            Observer::PrescribedTime(example1_pt()),
            Observer::HighGain(HgObserverSpec::new(vec![3.0, 2.0], 0.01).unwrap()),
        ] {
            let z = obs.rhs(&sys, &xhat, xhat[0], 0.3).unwrap();
            assert_eq!(z.as_slice(), &open_loop, "{obs:?}");
        }
    }

    #[test]
    fn dimension_mismatches_are_reported() {
        let sys = example1();
        let spec = example2_ext();
        let err = extended_pt_observer_rhs(&sys, &spec, &sv(&[0.0, 0.0]), 0.0, 0.0).unwrap_err();
        assert_eq!(err, ObserverError::EstimateDim { expected: 3, got: 2 });

        let pt = PtObserverSpec::new(vec![1.0, 2.0, 3.0], TimeScale::new(1.0, 0.1, 1e10).unwrap())
            .unwrap();
        let err = pt_observer_rhs(&sys, &pt, &sv(&[0.0, 0.0, 0.0]), 0.0, 0.0).unwrap_err();
        assert_eq!(err, ObserverError::PlantDim { expected: 3, got: 2 });
    }

    #[test]
    fn construction_validation() {
        let ts = TimeScale::new(1.0, 0.1, 1e10).unwrap();
        assert_eq!(
            PtObserverSpec::<f64>::new(vec![], ts).unwrap_err(),
            ObserverError::NoGains
        );
        assert_eq!(
            PtObserverSpec::new(vec![1.0, f64::NAN], ts).unwrap_err(),
            ObserverError::NonFiniteGain { index: 1 }
        );
        assert_eq!(
            HgObserverSpec::new(vec![1.0], 0.0).unwrap_err(),
            ObserverError::Epsilon(0.0)
        );
        assert!(ExtendedPtObserverSpec::new(vec![1.0], ts).is_err());
    }

    #[test]
    fn joint_rhs_stacks_plant_and_observer() {
        let sys = example1();
        let obs = Observer::PrescribedTime(example1_pt());
        let s = JointState { x: sv(&[0.0, 0.0]), xhat: sv(&[0.0, 0.0]) };
        let ds = joint_rhs(&sys, &obs, &s, 0.0).unwrap();
        assert_eq!(ds.x.as_slice(), &[0.0, 0.0]);
        assert_eq!(ds.xhat.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn zero_error_is_invariant_with_exact_model() {
        // f0 = f_n and d ≡ 0: starting at x̂ = x, the error derivative is 0
        let sys = TriangularSystem::parse(
            &["-sin(x1)", "-x1 - 0.02*x2^3 + u"],
            "-x1 - 0.02*x2^3 + u",
            "sin(0.35*t)",
            "0",
        )
        .unwrap();
        let obs = Observer::PrescribedTime(example1_pt());
        let x = sv(&[0.8, -0.3]);
        let s = JointState { x: x.clone(), xhat: x };
        let ds = joint_rhs(&sys, &obs, &s, 0.123).unwrap();
        assert_eq!(ds.x.as_slice(), ds.xhat.as_slice());
    }

    #[test]
    fn error_dynamics_match_explicit_form() {
        // d/dt(x−x̂) from the stacked rhs must equal the error dynamics
        //   ė_i = e_{i+1} + f_i(x)−f_i(x̂) − L_i μ^{i(1+m)} e₁
        //   ė_n = f_n(x,u) + d − f0(x̂,u) − L_n μ^{n(1+m)} e₁
        use rand::{Rng, SeedableRng};
        let sys = example1();
        let spec = example1_pt();
        let ts = *spec.timescale();
        let obs = Observer::PrescribedTime(spec.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut stack = Vec::new();
        for _ in 0..100 {
            let x = sv(&[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
            let xhat = sv(&[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
            let t: f64 = rng.gen_range(0.0..0.4999);
            let ds = joint_rhs(&sys, &obs, &JointState { x: x.clone(), xhat: xhat.clone() }, t)
                .unwrap();
            let edot = [ds.x[0] - ds.xhat[0], ds.x[1] - ds.xhat[1]];
            let u = sys.input(t).unwrap();
            let e1 = x[0] - xhat[0];
            let f1x = sys.stage_with(1, &x, u, &mut stack).unwrap();
            let f1h = sys.stage_with(1, &xhat, u, &mut stack).unwrap();
            let f2x = sys.stage_with(2, &x, u, &mut stack).unwrap();
            let f0h = sys.nominal_with(&xhat, u, &mut stack).unwrap();
            let d = sys.disturbance(t).unwrap();
            let want = [
                (x[1] - xhat[1]) + f1x - f1h - spec.gains()[0] * ts.mu(t).powf(1.1) * e1,
                f2x + d - f0h - spec.gains()[1] * ts.mu(t).powf(2.2) * e1,
            ];
            for k in 0..2 {
                let rel = (edot[k] - want[k]).abs() / want[k].abs().max(1.0);
                assert!(rel < 1e-10, "component {k}: {} vs {}", edot[k], want[k]);
            }
        }
    }
}
