//! The time-scaling function μ and the error-scaling diagonal Γ.
//!
//! μ(t) = T/(T−t) blows up as t approaches the prescribed time T; in
//! simulation it is saturated at `mu_cap` and held constant from the moment
//! the cap binds (including all t ≥ T, where the observer degenerates into a
//! constant high-gain observer). Stage `i` of a prescribed-time observer
//! scales its injection gain by μ^{i(1+m)}; the inverse powers form the
//! diagonal scaling Γ = diag{μ^{−(1+m)}, …, μ^{−n(1+m)}} used to transform
//! estimation errors into the contracting coordinates.


use crate::scalar::Real;

/// Saturation default: high enough that capping is invisible before
/// T − 10⁻¹⁰·T, low enough to stay finite in double precision.
pub const DEFAULT_MU_CAP: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum TimeScaleError {
    #[error("prescribed time must be positive and finite, got {0}")]
    PrescribedTime(f64),
    #[error("design exponent m must be positive and finite, got {0}")]
    Exponent(f64),
    #[error("mu cap must be at least 1, got {0}")]
    Cap(f64),
}

/// Prescribed time T, design exponent m and the saturation value for μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeScale<T> {
    t_prescribed: T,
    m: T,
    mu_cap: T,
}

impl<T: Real> TimeScale<T> {
    pub fn new(t_prescribed: T, m: T, mu_cap: T) -> Result<Self, TimeScaleError> {
        let as_f64 = |v: T| v.to_f64().unwrap_or(f64::NAN);
        if !(t_prescribed.is_finite() && t_prescribed > T::zero()) {
            return Err(TimeScaleError::PrescribedTime(as_f64(t_prescribed)));
        }
        if !(m.is_finite() && m > T::zero()) {
            return Err(TimeScaleError::Exponent(as_f64(m)));
        }
        if mu_cap.is_nan() || mu_cap < T::one() {
            return Err(TimeScaleError::Cap(as_f64(mu_cap)));
        }
        Ok(TimeScale { t_prescribed, m, mu_cap })
    }

    /// `new` with the default saturation value.
    pub fn with_default_cap(t_prescribed: T, m: T) -> Result<Self, TimeScaleError> {
        Self::new(t_prescribed, m, T::from_f64(DEFAULT_MU_CAP))
    }

    pub fn prescribed_time(&self) -> T {
        self.t_prescribed
    }

    pub fn m(&self) -> T {
        self.m
    }

    pub fn mu_cap(&self) -> T {
        self.mu_cap
    }

    /// μ(t) = min(T/(T−t), cap) for t < T and ≡ cap for t ≥ T; always in
    /// [1, cap].
    pub fn mu(&self, t: T) -> T {
        if t >= self.t_prescribed {
            return self.mu_cap;
        }
        let raw = self.t_prescribed / (self.t_prescribed - t);
        raw.min(self.mu_cap).max(T::one())
    }

    /// μ̇/μ, which is μ/T below the cap and 0 once the cap binds (the
    /// implemented gain is constant there).
    pub fn mu_dot_over_mu(&self, t: T) -> T {
        if t >= self.t_prescribed {
            return T::zero();
        }
        let raw = self.t_prescribed / (self.t_prescribed - t);
        if raw >= self.mu_cap {
            T::zero()
        } else {
            raw.max(T::one()) / self.t_prescribed
        }
    }

    /// μ(t)^{k(1+m)} — the injection-gain scale of stage `k` (and, at
    /// k = n+1, the contraction rate of the augmented design). Computed as
    /// an integer power of μ^{1+m} so repeated stages stay mutually
    /// consistent.
    pub fn gain_scale(&self, t: T, k: usize) -> T {
        let p = self.mu(t).powf(T::one() + self.m);
        p.powi(k as i32)
    }

    /// Γ diagonal: entry i (1-based) is μ(t)^{−i(1+m)}, in (0, 1].
    pub fn gamma_diag(&self, t: T, n: usize) -> Vec<T> {
        let p = self.mu(t).powf(T::one() + self.m);
        (1..=n).map(|i| p.powi(-(i as i32))).collect()
    }
}
