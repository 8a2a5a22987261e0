//! Convergence certificates for observer gain designs, and bound checks on
//! simulated trajectories.
//!
//! A gain vector L fixes the companion matrix A−LC (first column −L,
//! superdiagonal ones); the design is sound when that matrix is Hurwitz.
//! From the Lyapunov solution (A−LC)ᵀP + P(A−LC) = −I the certificate
//! derives, for user-supplied envelope constants γ̄_f (aggregate Lipschitz
//! size of the stage nonlinearities) and σ̄ (size of the lumped model error
//! plus disturbance):
//!
//! * λ₁ = 1 (by the Q = I normalization) and λ₂ = λ_min(PD + DP) with
//!   D = diag(1…n), which must be positive,
//! * a = 2·γ̄_f·λ_max(P) and b = 2·σ̄·λ_max(P),
//! * t₁* — the time at which (λ₁/4)·μ^{1+m} overtakes a, after which the
//!   scaled error is forced into a shrinking ball of radius
//!   2b/(λ₁·μ^{(n+1)(1+m)}).
//!
//! [`check_trajectory_bounds`] then verifies on a recorded trajectory that
//! the scaled error ‖z‖ (z = Γe) stays under √(V(0)/λ_min(P))·e^{a·t/2}
//! and the raw error ‖e‖ under the same envelope times μ^{n(1+m)} for
//! t ≤ t₁*, and finds the first sample where ‖z‖ drops inside the ball.

use num_complex::Complex;

use crate::linalg::{self, LinalgError, Mat};
use crate::scalar::Real;
use crate::sim::Trajectory;
use crate::timescale::TimeScale;

/// Real-part threshold for calling an eigenvalue stable.
const HURWITZ_TOL: f64 = -1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CertifyError {
    #[error("gain vector must be non-empty")]
    NoGains,
    #[error("matrix is not Hurwitz (max eigenvalue real part {0})")]
    NotHurwitz(f64),
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("Lyapunov residual {residual} exceeds tolerance {tol}")]
    LyapunovResidual { residual: f64, tol: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("certificate carries no analysis (design is not Hurwitz)")]
    NoAnalysis,
    #[error("trajectory has {traj} plant states but the certificate was built for {cert}")]
    DimensionMismatch { traj: usize, cert: usize },
    #[error("trajectory has no samples in [0, t1*]")]
    NoSamplesBeforeT1,
    #[error("disturbance-extended bound check needs recorded true disturbance samples")]
    MissingDisturbance,
}

/// The structural matrices of the error dynamics in dimension n: the shift
/// A (superdiagonal ones), input column B (last unit), output row C (first
/// unit) and the index diagonal D = diag(1…n).
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalMatrices<T> {
    pub a: Mat<T>,
    pub b: Mat<T>,
    pub c: Mat<T>,
    pub d: Mat<T>,
}

pub fn canonical_matrices<T: Real>(n: usize) -> CanonicalMatrices<T> {
    assert!(n >= 1);
    let mut a = Mat::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = T::one();
    }
    let mut b = Mat::zeros(n, 1);
    b[(n - 1, 0)] = T::one();
    let mut c = Mat::zeros(1, n);
    c[(0, 0)] = T::one();
    let mut d = Mat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = T::from_usize(i + 1);
    }
    CanonicalMatrices { a, b, c, d }
}

/// A − LC for the gain vector L: first column −L, superdiagonal ones.
pub fn companion<T: Real>(l: &[T]) -> Mat<T> {
    let n = l.len();
    assert!(n >= 1, "empty gain vector");
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, 0)] = -l[i];
        if i + 1 < n {
            m[(i, i + 1)] = T::one();
        }
    }
    m
}

fn is_companion_form<T: Real>(m: &Mat<T>) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.n_rows();
    for i in 0..n {
        for j in 1..n {
            let want = if j == i + 1 { T::one() } else { T::zero() };
            if m[(i, j)] != want {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues, sorted by (re, im). Companion-form inputs go through
/// characteristic-polynomial root finding (the polynomial is available by
/// construction); everything else through Hessenberg-QR iteration.
pub fn eigenvalues<T: Real>(m: &Mat<T>) -> Result<Vec<Complex<T>>, LinalgError> {
    if is_companion_form(m) {
        let n = m.n_rows();
        // char poly λⁿ + L₁λⁿ⁻¹ + … + L_n with L_i = −m[i][0]
        let coeffs: Vec<T> = (0..n).rev().map(|i| -m[(i, 0)]).collect();
        return linalg::monic_roots(&coeffs);
    }
    linalg::general_eigenvalues(m)
}

/// All real parts strictly below the stability threshold.
pub fn is_hurwitz<T: Real>(eigs: &[Complex<T>]) -> bool {
    let tol = T::from_f64(HURWITZ_TOL);
    !eigs.is_empty() && eigs.iter().all(|e| e.re < tol)
}

/// Solve MᵀP + PM = −Q for symmetric positive-definite P via the n²×n²
/// Kronecker system. M must be Hurwitz and Q symmetric positive definite.
pub fn solve_lyapunov<T: Real>(m: &Mat<T>, q: &Mat<T>) -> Result<Mat<T>, CertifyError> {
    let n = m.n_rows();
    if !m.is_square() || !q.is_square() || q.n_rows() != n {
        return Err(CertifyError::Linalg(LinalgError::NotSquare));
    }
    let eigs = eigenvalues(m)?;
    if !is_hurwitz(&eigs) {
        let max_re = eigs
            .iter()
            .map(|e| e.re)
            .fold(T::neg_infinity(), T::max);
        return Err(CertifyError::NotHurwitz(to_f64(max_re)));
    }
    let q_min = linalg::symmetric_eig_min(q).map_err(|_| CertifyError::NotSpd)?;
    if q_min <= T::zero() {
        return Err(CertifyError::NotSpd);
    }

    // column-major vec: row (i,j) of MᵀP + PM = −Q becomes row i + n·j
    let mut k = Mat::zeros(n * n, n * n);
    let mut rhs = Mat::zeros(n * n, 1);
    for j in 0..n {
        for i in 0..n {
            let row = i + n * j;
            for l in 0..n {
                k[(row, l + n * j)] += m[(l, i)]; // (I ⊗ Mᵀ)
                k[(row, i + n * l)] += m[(l, j)]; // (Mᵀ ⊗ I)
            }
            rhs[(row, 0)] = -q[(i, j)];
        }
    }
    let vec_p = linalg::solve(k, rhs)?;
    let mut p = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            p[(i, j)] = vec_p[(i + n * j, 0)];
        }
    }
    let p = p.symmetrize();

    let residual = m.transpose().matmul(&p).add(&p.matmul(m)).add(q).norm_fro();
    let tol = T::from_f64(1e-9) * q.norm_fro();
    if residual > tol {
        return Err(CertifyError::LyapunovResidual {
            residual: to_f64(residual),
            tol: to_f64(tol),
        });
    }
    if linalg::symmetric_eig_min(&p)? <= T::zero() {
        return Err(CertifyError::NotSpd);
    }
    Ok(p)
}

/// λ_min(PD + DP) with D = diag(1…n) for symmetric positive-definite P.
///
/// The classical convergence argument assumes this is positive, but that is
/// a per-matrix fact, not a theorem: strongly correlated P (e.g.
/// [[1, 0.95], [0.95, 1]] with n = 2) is positive definite while PD + DP is
/// indefinite. Callers relying on positivity must check the returned sign.
pub fn index_diag_lambda<T: Real>(p: &Mat<T>) -> Result<T, CertifyError> {
    let n = p.n_rows();
    if !p.is_square() {
        return Err(CertifyError::Linalg(LinalgError::NotSquare));
    }
    let p_min = linalg::symmetric_eig_min(p).map_err(|_| CertifyError::NotSpd)?;
    if p_min <= T::zero() {
        return Err(CertifyError::NotSpd);
    }
    let d = canonical_matrices::<T>(n).d;
    let pd_dp = p.matmul(&d).add(&d.matmul(p));
    Ok(linalg::symmetric_eig_min(&pd_dp)?)
}

/// The growth/forcing constants of the error bound and the time the gain
/// overtakes the growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofConstants<T> {
    /// 2·γ̄_f·λ_max(P) — exponential growth rate of the scaled error bound.
    pub a: T,
    /// 2·σ̄·λ_max(P) — forcing size in the shrinking-ball radius.
    pub b: T,
    /// Smallest t ≥ 0 with (λ₁/4)·μ(t)^{1+m} ≥ a; zero when the condition
    /// already holds at μ = 1.
    pub t1_star: T,
}

pub fn proof_constants<T: Real>(
    lambda1: T,
    lambda_max_p: T,
    gamma_bar_f: T,
    sigma_bar: T,
    ts: &TimeScale<T>,
) -> ProofConstants<T> {
    let two = T::from_f64(2.0);
    let four = T::from_f64(4.0);
    let a = two * gamma_bar_f * lambda_max_p;
    let b = two * sigma_bar * lambda_max_p;
    let t1_star = if a <= lambda1 / four {
        T::zero()
    } else {
        // solve (λ₁/4)·μ^{1+m} = a for t with μ = T/(T−t)
        let ratio = (lambda1 / (four * a)).powf(T::one() / (T::one() + ts.m()));
        ts.prescribed_time() * (T::one() - ratio)
    };
    ProofConstants { a, b, t1_star }
}

/// Everything derivable from P once the design is Hurwitz.
#[derive(Debug, Clone, PartialEq)]
pub struct CertAnalysis<T> {
    pub p: Mat<T>,
    pub lambda1: T,
    pub lambda2: T,
    pub lambda_min_p: T,
    pub lambda_max_p: T,
    pub gamma_bar_f: T,
    pub sigma_bar: T,
    pub a: T,
    pub b: T,
    pub t1_star: T,
}

/// Gain-design certificate: spectrum, Hurwitz verdict, and (for stable
/// designs) the Lyapunov-derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T> {
    l: Vec<T>,
    ts: TimeScale<T>,
    eigenvalues: Vec<Complex<T>>,
    hurwitz: bool,
    analysis: Option<CertAnalysis<T>>,
}

impl<T: Real> Certificate<T> {
    /// Build the certificate for gains `l` (length = design dimension; n+1
    /// for disturbance-extended designs). γ̄_f and σ̄ are the user's
    /// envelope constants; they enter only a and b, never the gains.
    pub fn new(
        l: &[T],
        ts: TimeScale<T>,
        gamma_bar_f: T,
        sigma_bar: T,
    ) -> Result<Self, CertifyError> {
        if l.is_empty() {
            return Err(CertifyError::NoGains);
        }
        let m = companion(l);
        let eigenvalues = eigenvalues(&m)?;
        let hurwitz = is_hurwitz(&eigenvalues);
        let analysis = if hurwitz {
            let n = l.len();
            let p = solve_lyapunov(&m, &Mat::identity(n))?;
            // Q = I makes (A−LC)ᵀP + P(A−LC) = −I, so λ₁ = 1 exactly
            let lambda1 = T::one();
            let lambda2 = index_diag_lambda(&p)?;
            let spectrum = linalg::symmetric_eigenvalues(&p)?;
            let lambda_min_p = spectrum[0];
            let lambda_max_p = *spectrum.last().expect("empty spectrum");
            let pc = proof_constants(lambda1, lambda_max_p, gamma_bar_f, sigma_bar, &ts);
            Some(CertAnalysis {
                p,
                lambda1,
                lambda2,
                lambda_min_p,
                lambda_max_p,
                gamma_bar_f,
                sigma_bar,
                a: pc.a,
                b: pc.b,
                t1_star: pc.t1_star,
            })
        } else {
            None
        };
        Ok(Certificate { l: l.to_vec(), ts, eigenvalues, hurwitz, analysis })
    }

    pub fn gains(&self) -> &[T] {
        &self.l
    }

    /// Design dimension (gain count).
    pub fn dim(&self) -> usize {
        self.l.len()
    }

    pub fn timescale(&self) -> &TimeScale<T> {
        &self.ts
    }

    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.eigenvalues
    }

    pub fn is_hurwitz(&self) -> bool {
        self.hurwitz
    }

    pub fn analysis(&self) -> Option<&CertAnalysis<T>> {
        self.analysis.as_ref()
    }

    /// Shrinking-ball radius 2b/(λ₁·μ(t)^{(n+1)(1+m)}); strictly decreasing
    /// below the μ cap.
    pub fn ball_radius(&self, t: T) -> Result<T, CertifyError> {
        let an = self.analysis.as_ref().ok_or(CertifyError::NoAnalysis)?;
        let two = T::from_f64(2.0);
        Ok(two * an.b / (an.lambda1 * self.ts.gain_scale(t, self.l.len() + 1)))
    }
}

/// Pole-placement convenience: L such that companion(L) has the given real
/// poles, i.e. the non-leading coefficients of ∏(s − p_i).
pub fn gains_from_poles<T: Real>(poles: &[T]) -> Vec<T> {
    // poly[k] is the coefficient of s^{n−k} as factors accumulate
    let mut poly = vec![T::one()];
    for &p in poles {
        poly.push(T::zero());
        for k in (1..poly.len()).rev() {
            let low = poly[k - 1] * -p;
            poly[k] += low;
        }
    }
    poly.remove(0);
    poly
}

/// Verdict of one per-sample envelope comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck<T> {
    pub pass: bool,
    /// Samples examined.
    pub samples: usize,
    /// min over samples of (bound − value); negative on failure.
    pub min_margin: T,
    /// Time of the first violated sample.
    pub first_violation: Option<T>,
}

/// Result of checking a trajectory against a certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport<T> {
    pub t1_star: T,
    /// ‖z(t)‖ against √(V(0)/λ_min(P))·e^{a·t/2} on [0, t₁*].
    pub scaled: BoundCheck<T>,
    /// ‖e(t)‖ against the same envelope times μ^{n(1+m)} on [0, t₁*].
    pub state: BoundCheck<T>,
    /// First sample time in (t₁*, T) with ‖z‖ inside the shrinking ball —
    /// the empirical capture time.
    pub ball_entry_time: Option<T>,
}

/// Check the certificate's two error envelopes and find the ball-capture time.
///
/// For a certificate of dimension n+1 driven by a disturbance-extended run,
/// the error vector is augmented with d(t) − d̂(t) (the trajectory must
/// carry recorded true-disturbance samples).
pub fn check_trajectory_bounds<T: Real>(
    traj: &Trajectory<T>,
    cert: &Certificate<T>,
) -> Result<BoundsReport<T>, CertifyError> {
    let an = cert.analysis().ok_or(CertifyError::NoAnalysis)?;
    let n = traj.plant_dim();
    let nu = cert.dim();
    let augmented = nu == n + 1 && traj.observer_dim() == n + 1;
    if !(nu == n || augmented) {
        return Err(CertifyError::DimensionMismatch { traj: n, cert: nu });
    }
    if augmented && traj.d_true().is_none() {
        return Err(CertifyError::MissingDisturbance);
    }
    if traj.is_empty() {
        return Err(CertifyError::NoSamplesBeforeT1);
    }
    let ts = cert.timescale();
    let t1 = an.t1_star;
    let half = T::from_f64(0.5);

    // error in the design coordinates at sample s
    let error_at = |s: usize| -> Vec<T> {
        let x = traj.x_row(s);
        let xh = traj.xhat_row(s);
        let mut e: Vec<T> = (0..n).map(|i| x[i] - xh[i]).collect();
        if augmented {
            let d = traj.d_true().expect("checked above")[s];
            e.push(d - xh[n]);
        }
        e
    };

    let znorm_at = |s: usize| -> T {
        let e = error_at(s);
        let g = ts.gamma_diag(traj.times()[s], nu);
        e.iter()
            .zip(&g)
            .map(|(ei, gi)| {
                let z = *ei * *gi;
                z * z
            })
            .sum::<T>()
            .sqrt()
    };

    // V(0) = z(0)ᵀ P z(0)
    let v0 = {
        let e = error_at(0);
        let g = ts.gamma_diag(traj.times()[0], nu);
        let z: Vec<T> = e.iter().zip(&g).map(|(ei, gi)| *ei * *gi).collect();
        let mut acc = T::zero();
        for i in 0..nu {
            for j in 0..nu {
                acc += z[i] * an.p[(i, j)] * z[j];
            }
        }
        acc
    };
    let envelope0 = (v0 / an.lambda_min_p).sqrt();

    let mut scaled = BoundCheck {
        pass: true,
        samples: 0,
        min_margin: T::infinity(),
        first_violation: None,
    };
    let mut state = scaled;
    let mut ball_entry_time = None;

    for s in 0..traj.len() {
        let t = traj.times()[s];
        if t <= t1 {
            let envelope = envelope0 * (an.a * t * half).exp();
            let zn = znorm_at(s);
            let margin_z = envelope - zn;
            scaled.samples += 1;
            scaled.min_margin = scaled.min_margin.min(margin_z);
            if margin_z < T::zero() && scaled.first_violation.is_none() {
                scaled.pass = false;
                scaled.first_violation = Some(t);
            }

            let e = error_at(s);
            let en = e.iter().map(|v| *v * *v).sum::<T>().sqrt();
            let margin_e = envelope * ts.gain_scale(t, nu) - en;
            state.samples += 1;
            state.min_margin = state.min_margin.min(margin_e);
            if margin_e < T::zero() && state.first_violation.is_none() {
                state.pass = false;
                state.first_violation = Some(t);
            }
        } else if t < ts.prescribed_time() && ball_entry_time.is_none() {
            let zn = znorm_at(s);
            if zn < cert.ball_radius(t)? {
                ball_entry_time = Some(t);
            }
        }
    }
    if scaled.samples == 0 {
        return Err(CertifyError::NoSamplesBeforeT1);
    }
    Ok(BoundsReport { t1_star: t1, scaled, state, ball_entry_time })
}

fn to_f64<T: Real>(v: T) -> f64 {
    num_traits::ToPrimitive::to_f64(&v).unwrap_or(f64::NAN)
}
