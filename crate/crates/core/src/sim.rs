//! Deterministic RK4 integration of the joint plant+observer system across
//! the t → T gain blow-up.
//!
//! The driver uses a fixed base step and, when `singularity_shrink` is on,
//! scales the step by (T−t)/T inside the window (T−10·dt_base, T), floored
//! at `dt_min` — the gain growth near T is geometric in T−t, so the step
//! follows it geometrically instead of adaptively. Samples land exactly on
//! T−dt_min, on T itself and on t_end (the step is clipped onto those
//! targets and the time is assigned, not accumulated), which is what makes
//! golden-file comparisons and cross-run determinism exact.
//!
//! Several observers can ride one plant integration in lockstep
//! ([`simulate_multi`]): the plant is stepped once and every observer sees
//! the same measurement stream, which keeps comparisons fair and keeps the
//! plant columns of all trajectories bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{StateVec, TriangularSystem};
use crate::observers::{Observer, ObserverError};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SimConfigError {
    #[error("t_end must be positive and finite")]
    TEnd,
    #[error("dt_base must be positive and finite")]
    DtBase,
    #[error("dt_min must satisfy 0 < dt_min <= dt_base and stay above time resolution")]
    DtMin,
    #[error("record_stride must be at least 1")]
    RecordStride,
    #[error("noise_std must be finite and non-negative")]
    NoiseStd,
}

/// Integration horizon, step policy, output decimation and measurement
/// noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub t_end: T,
    pub dt_base: T,
    pub dt_min: T,
    /// Scale the step by (T−t)/T inside (T−10·dt_base, T).
    pub singularity_shrink: bool,
    /// Record every k-th accepted step (landings and endpoints always).
    pub record_stride: usize,
    /// Standard deviation of additive Gaussian noise on the measured
    /// output; 0 disables the noise path entirely.
    pub noise_std: T,
    /// PRNG seed for the noise stream.
    pub seed: u64,
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<(), SimConfigError> {
        if !(self.t_end.is_finite() && self.t_end > T::zero()) {
            return Err(SimConfigError::TEnd);
        }
        if !(self.dt_base.is_finite() && self.dt_base > T::zero()) {
            return Err(SimConfigError::DtBase);
        }
        // the floor must stay representable against t_end, or stepping stalls
        let resolution = self.t_end * T::epsilon() * T::from_f64(4.0);
        if !(self.dt_min > T::zero() && self.dt_min <= self.dt_base && self.dt_min > resolution)
        {
            return Err(SimConfigError::DtMin);
        }
        if self.record_stride == 0 {
            return Err(SimConfigError::RecordStride);
        }
        if !(self.noise_std.is_finite() && self.noise_std >= T::zero()) {
            return Err(SimConfigError::NoiseStd);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrajectoryError {
    #[error("sample arrays have inconsistent lengths")]
    RaggedSamples,
    #[error("times must be strictly increasing")]
    NonMonotoneTimes,
    #[error("observer dimension {k} is below plant dimension {n}")]
    ObserverTooNarrow { n: usize, k: usize },
}

/// Time-indexed record of one plant+observer run. Row-major flat storage:
/// sample `s` owns `x[s*n..(s+1)*n]` and `xhat[s*k..(s+1)*k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    n: usize,
    k: usize,
    times: Vec<T>,
    x: Vec<T>,
    xhat: Vec<T>,
    err_norm: Vec<T>,
    mu_val: Vec<T>,
    d_true: Option<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Assemble from raw columns; `err_norm` is recomputed from the states
    /// so it can never disagree with them.
    pub fn from_raw(
        n: usize,
        k: usize,
        times: Vec<T>,
        x: Vec<T>,
        xhat: Vec<T>,
        mu_val: Vec<T>,
        d_true: Option<Vec<T>>,
    ) -> Result<Self, TrajectoryError> {
        if k < n {
            return Err(TrajectoryError::ObserverTooNarrow { n, k });
        }
        let s = times.len();
        if x.len() != s * n
            || xhat.len() != s * k
            || mu_val.len() != s
            || d_true.as_ref().is_some_and(|d| d.len() != s)
        {
            return Err(TrajectoryError::RaggedSamples);
        }
        // `>` (not `>=`-negation tricks): a NaN timestamp must fail this too
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(TrajectoryError::NonMonotoneTimes);
        }
        let err_norm = (0..s)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let e = x[i * n + j] - xhat[i * k + j];
                        e * e
                    })
                    .sum::<T>()
                    .sqrt()
            })
            .collect();
        Ok(Trajectory { n, k, times, x, xhat, err_norm, mu_val, d_true })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn plant_dim(&self) -> usize {
        self.n
    }

    pub fn observer_dim(&self) -> usize {
        self.k
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn x_row(&self, s: usize) -> &[T] {
        &self.x[s * self.n..(s + 1) * self.n]
    }

    pub fn xhat_row(&self, s: usize) -> &[T] {
        &self.xhat[s * self.k..(s + 1) * self.k]
    }

    /// ‖x − x̂[1..n]‖₂ per sample (the plant-state part only).
    pub fn err_norm(&self) -> &[T] {
        &self.err_norm
    }

    pub fn mu(&self) -> &[T] {
        &self.mu_val
    }

    /// Recorded true disturbance (disturbance-estimating runs only).
    pub fn d_true(&self) -> Option<&[T]> {
        self.d_true.as_deref()
    }

    /// Disturbance estimate at sample `s` (observer state n+1), if any.
    pub fn dhat(&self, s: usize) -> Option<T> {
        (self.k > self.n).then(|| self.xhat_row(s)[self.n])
    }

    /// Sample index with time nearest to `t`.
    pub fn nearest_sample(&self, t: T) -> usize {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (i, &ti) in self.times.iter().enumerate() {
            let d = (ti - t).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError<T: Real> {
    #[error("invalid simulation config: {0}")]
    Config(#[from] SimConfigError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error("plant initial state has dimension {got}, expected {expected}")]
    InitialDim { expected: usize, got: usize },
    #[error("one initial estimate is required per observer")]
    InitialCount,
    #[error("state became non-finite; last good time {t_last_good}")]
    NonFinite {
        t_last_good: T,
        /// Per-observer partial trajectories up to the last finite state.
        partial: Vec<Trajectory<T>>,
    },
}

/// One classical RK4 step failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Rk4Error<T: Real, E> {
    #[error("non-finite stage value at t = {t}")]
    NonFiniteStage { t: T },
    #[error("right-hand side failed: {0}")]
    Rhs(E),
}

struct Rk4Scratch<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: Real> Rk4Scratch<T> {
    fn new(dim: usize) -> Self {
        Rk4Scratch {
            k1: vec![T::zero(); dim],
            k2: vec![T::zero(); dim],
            k3: vec![T::zero(); dim],
            k4: vec![T::zero(); dim],
            tmp: vec![T::zero(); dim],
        }
    }

    /// s ← s + (h/6)(k₁ + 2k₂ + 2k₃ + k₄); stages checked finite.
    // indexed loops: each walks `s` in lockstep with one or more scratch
    // buffers on &mut self, which zip chains can't split-borrow cleanly
    #[allow(clippy::needless_range_loop)]
    fn step<E, F>(&mut self, f: &mut F, s: &mut [T], t: T, h: T) -> Result<(), Rk4Error<T, E>>
    where
        F: FnMut(&[T], T, &mut [T]) -> Result<(), E>,
    {
        let half = T::from_f64(0.5);
        let two = T::from_f64(2.0);
        let sixth = h / T::from_f64(6.0);
        let dim = s.len();

        f(s, t, &mut self.k1).map_err(Rk4Error::Rhs)?;
        for i in 0..dim {
            self.tmp[i] = s[i] + half * h * self.k1[i];
        }
        f(&self.tmp, t + half * h, &mut self.k2).map_err(Rk4Error::Rhs)?;
        for i in 0..dim {
            self.tmp[i] = s[i] + half * h * self.k2[i];
        }
        f(&self.tmp, t + half * h, &mut self.k3).map_err(Rk4Error::Rhs)?;
        for i in 0..dim {
            self.tmp[i] = s[i] + h * self.k3[i];
        }
        f(&self.tmp, t + h, &mut self.k4).map_err(Rk4Error::Rhs)?;

        for i in 0..dim {
            let incr = self.k1[i] + two * self.k2[i] + two * self.k3[i] + self.k4[i];
            if !incr.is_finite() {
                return Err(Rk4Error::NonFiniteStage { t });
            }
            s[i] += sixth * incr;
        }
        Ok(())
    }
}

/// One classical RK4 step of ṡ = f(s, t), as a fresh state vector.
pub fn rk4_step<T: Real, E, F>(mut f: F, s: &[T], t: T, h: T) -> Result<Vec<T>, Rk4Error<T, E>>
where
    F: FnMut(&[T], T, &mut [T]) -> Result<(), E>,
{
    let mut scratch = Rk4Scratch::new(s.len());
    let mut out = s.to_vec();
    scratch.step(&mut f, &mut out, t, h)?;
    Ok(out)
}

struct TrajBuilder<T> {
    n: usize,
    k: usize,
    times: Vec<T>,
    x: Vec<T>,
    xhat: Vec<T>,
    err_norm: Vec<T>,
    mu_val: Vec<T>,
    d_true: Option<Vec<T>>,
}

impl<T: Real> TrajBuilder<T> {
    fn finish(self) -> Trajectory<T> {
        Trajectory {
            n: self.n,
            k: self.k,
            times: self.times,
            x: self.x,
            xhat: self.xhat,
            err_norm: self.err_norm,
            mu_val: self.mu_val,
            d_true: self.d_true,
        }
    }
}

/// Integrate one observer against the plant. See [`simulate_multi`] for the
/// step and recording policy.
pub fn simulate<T: Real>(
    sys: &TriangularSystem<T>,
    obs: &Observer<T>,
    x0: &StateVec<T>,
    xhat0: &StateVec<T>,
    cfg: &SimConfig<T>,
) -> Result<Trajectory<T>, SimError<T>> {
    let mut trajs = simulate_multi(
        sys,
        std::slice::from_ref(obs),
        x0,
        std::slice::from_ref(xhat0),
        cfg,
    )?;
    Ok(trajs.pop().expect("one trajectory per observer"))
}

/// Integrate several observers against one shared plant run.
///
/// The plant is stepped exactly once; at every step each observer receives
/// the same measurement y = x₁ (+ noise when enabled). The step grid is the
/// union of all observers' constraints: the shrink window and the landing
/// points T−dt_min and T of every prescribed-time observer, plus t_end.
pub fn simulate_multi<T: Real>(
    sys: &TriangularSystem<T>,
    observers: &[Observer<T>],
    x0: &StateVec<T>,
    xhat0: &[StateVec<T>],
    cfg: &SimConfig<T>,
) -> Result<Vec<Trajectory<T>>, SimError<T>> {
    cfg.validate()?;
    let n = sys.dim();
    if x0.dim() != n {
        return Err(SimError::InitialDim { expected: n, got: x0.dim() });
    }
    if observers.is_empty() || observers.len() != xhat0.len() {
        return Err(SimError::InitialCount);
    }
    for (obs, xh) in observers.iter().zip(xhat0) {
        if obs.plant_dim() != n {
            return Err(ObserverError::PlantDim { expected: obs.plant_dim(), got: n }.into());
        }
        if xh.dim() != obs.state_dim() {
            return Err(ObserverError::EstimateDim {
                expected: obs.state_dim(),
                got: xh.dim(),
            }
            .into());
        }
    }

    // state layout: [x | xhat_0 | xhat_1 | …]
    let mut offsets = Vec::with_capacity(observers.len());
    let mut total = n;
    for obs in observers {
        offsets.push(total);
        total += obs.state_dim();
    }
    let mut s = Vec::with_capacity(total);
    s.extend_from_slice(x0);
    for xh in xhat0 {
        s.extend_from_slice(xh);
    }

    // landing targets: T−dt_min and T per prescribed-time observer, then t_end
    let mut targets: Vec<T> = Vec::new();
    for ts in observers.iter().filter_map(|o| o.timescale()) {
        let tp = ts.prescribed_time();
        if tp > T::zero() && tp <= cfg.t_end {
            targets.push(tp);
            let pre = tp - cfg.dt_min;
            if pre > T::zero() {
                targets.push(pre);
            }
        }
    }
    targets.push(cfg.t_end);
    targets.sort_by(|a, b| a.partial_cmp(b).expect("non-finite target"));
    targets.dedup();

    let mut rng = (cfg.noise_std > T::zero()).then(|| ChaCha8Rng::seed_from_u64(cfg.seed));

    let mut builders: Vec<TrajBuilder<T>> = observers
        .iter()
        .map(|obs| TrajBuilder {
            n,
            k: obs.state_dim(),
            times: Vec::new(),
            x: Vec::new(),
            xhat: Vec::new(),
            err_norm: Vec::new(),
            mu_val: Vec::new(),
            d_true: obs.estimates_disturbance().then(Vec::new),
        })
        .collect();

    let mut scratch = Rk4Scratch::new(total);
    let mut stack: Vec<T> = Vec::new();
    let mut prev = s.clone();

    let ten = T::from_f64(10.0);

    let mut t = T::zero();
    let mut step_count: usize = 0;
    let mut target_idx = 0usize;

    // borrowck: recording needs &mut builders and &mut stack, so it lives in
    // a free fn instead of a closure capturing them
    #[allow(clippy::too_many_arguments)]
    fn record<T: Real>(
        builders: &mut [TrajBuilder<T>],
        observers: &[Observer<T>],
        offsets: &[usize],
        sys: &TriangularSystem<T>,
        s: &[T],
        t: T,
        n: usize,
        stack: &mut Vec<T>,
    ) -> Result<(), ObserverError> {
        for ((b, obs), &off) in builders.iter_mut().zip(observers).zip(offsets) {
            if b.times.last().is_some_and(|&last| last == t) {
                continue; // already recorded this instant
            }
            let k = obs.state_dim();
            b.times.push(t);
            b.x.extend_from_slice(&s[..n]);
            b.xhat.extend_from_slice(&s[off..off + k]);
            let err = (0..n)
                .map(|j| {
                    let e = s[j] - s[off + j];
                    e * e
                })
                .sum::<T>()
                .sqrt();
            b.err_norm.push(err);
            b.mu_val.push(obs.mu_sample(t));
            if let Some(d) = b.d_true.as_mut() {
                d.push(sys.disturbance_with(t, stack)?);
            }
        }
        Ok(())
    }

    record(&mut builders, observers, &offsets, sys, &s, t, n, &mut stack)?;

    while t < cfg.t_end {
        while targets[target_idx] <= t {
            target_idx += 1;
        }
        let target = targets[target_idx];

        let mut h = cfg.dt_base;
        if cfg.singularity_shrink {
            for ts in observers.iter().filter_map(|o| o.timescale()) {
                let tp = ts.prescribed_time();
                if t > tp - ten * cfg.dt_base && t < tp {
                    let shrunk = (cfg.dt_base * (tp - t) / tp).max(cfg.dt_min);
                    h = h.min(shrunk);
                }
            }
        }
        // evaluated as t + h, not target − t: the landing decision must see
        // the same rounding the time accumulator does, or a step can strand
        // the clock one ulp short of (or silently on) the target
        let landing = t + h >= target;
        if landing {
            h = target - t;
        }

        let noise = match rng.as_mut() {
            Some(r) => {
                let eps: f64 = r.sample(StandardNormal);
                cfg.noise_std * T::from_f64(eps)
            }
            None => T::zero(),
        };

        prev.copy_from_slice(&s);
        let step_result = {
            let mut f = |state: &[T], tt: T, out: &mut [T]| -> Result<(), ObserverError> {
                let y = state[0] + noise;
                for (obs, &off) in observers.iter().zip(&offsets) {
                    let k = obs.state_dim();
                    // plant written once, on the first observer's pass
                    if off == n {
                        sys.rhs_into(&state[..n], tt, &mut out[..n], &mut stack)?;
                    }
                    obs.rhs_into(sys, &state[off..off + k], y, tt, &mut out[off..off + k], &mut stack)?;
                }
                Ok(())
            };
            scratch.step(&mut f, &mut s, t, h)
        };

        let t_next = if landing { target } else { t + h };
        let blown_up = match &step_result {
            Ok(()) => !s.iter().all(|v| v.is_finite()),
            Err(Rk4Error::NonFiniteStage { .. }) => true,
            Err(Rk4Error::Rhs(ObserverError::Eval(
                crate::model::EvalError::NonFinite(_),
            ))) => true,
            Err(Rk4Error::Rhs(_)) => false,
        };
        if blown_up {
            // make sure the last finite state is on record, then bail
            record(&mut builders, observers, &offsets, sys, &prev, t, n, &mut stack)?;
            return Err(SimError::NonFinite {
                t_last_good: t,
                partial: builders.into_iter().map(TrajBuilder::finish).collect(),
            });
        }
        if let Err(Rk4Error::Rhs(e)) = step_result {
            return Err(e.into());
        }

        t = t_next;
        step_count += 1;
        if landing || step_count.is_multiple_of(cfg.record_stride) || t >= cfg.t_end {
            record(&mut builders, observers, &offsets, sys, &s, t, n, &mut stack)?;
        }
    }

    Ok(builders.into_iter().map(TrajBuilder::finish).collect())
}
