//! Small dense-matrix helpers: linear solves, symmetric eigenvalues,
//! polynomial and general eigenvalues.
//!
//! Certificate computations need n ≤ ~10 matrices, so everything here is a
//! direct textbook method chosen for verifiable behavior at tiny sizes:
//! Gaussian elimination with partial pivoting, cyclic Jacobi for symmetric
//! eigenvalues, Durand–Kerner for companion spectra (the characteristic
//! polynomial is available by construction) and a shifted Hessenberg QR
//! fallback for general matrices.

use num_complex::Complex;

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Mat { n_rows, n_cols, data: vec![T::zero(); n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat { n_rows, n_cols, data }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut out = Mat::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.n_cols, rhs.n_rows, "dimension mismatch");
        let mut out = Mat::zeros(self.n_rows, rhs.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.n_cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.n_rows, self.n_cols), (rhs.n_rows, rhs.n_cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.n_rows, self.n_cols), (rhs.n_rows, rhs.n_cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a -= *b;
        }
        out
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> T {
        self.data.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.n_rows {
            for j in 0..i {
                if (self[(i, j)] - self[(j, i)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// (A + Aᵀ)/2 — clean up tiny asymmetries before symmetric routines.
    pub fn symmetrize(&self) -> Mat<T> {
        assert!(self.is_square());
        let half = T::from_f64(0.5);
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for j in 0..i {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n_cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n_cols + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
}

/// Solve A·x = b for multiple right-hand sides (columns of `b`) by Gaussian
/// elimination with partial pivoting. `a` and `b` are consumed as scratch.
pub fn solve<T: Real>(mut a: Mat<T>, mut b: Mat<T>) -> Result<Mat<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare);
    }
    let n = a.n_rows;
    assert_eq!(b.n_rows, n, "rhs row count mismatch");
    let m = b.n_cols;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[(col, col)].abs();
        for r in col + 1..n {
            let v = a[(r, col)].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == T::zero() || !best.is_finite() {
            return Err(LinalgError::Singular);
        }
        if piv != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            for j in 0..m {
                let tmp = b[(col, j)];
                b[(col, j)] = b[(piv, j)];
                b[(piv, j)] = tmp;
            }
        }
        let d = a[(col, col)];
        for r in col + 1..n {
            let factor = a[(r, col)] / d;
            if factor == T::zero() {
                continue;
            }
            a[(r, col)] = T::zero();
            for j in col + 1..n {
                let v = a[(col, j)] * factor;
                a[(r, j)] -= v;
            }
            for j in 0..m {
                let v = b[(col, j)] * factor;
                b[(r, j)] -= v;
            }
        }
    }
    // back substitution
    for col in (0..n).rev() {
        let d = a[(col, col)];
        for j in 0..m {
            let mut acc = b[(col, j)];
            for k in col + 1..n {
                acc -= a[(col, k)] * b[(k, j)];
            }
            b[(col, j)] = acc / d;
        }
    }
    Ok(b)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &Mat<T>) -> Result<Vec<T>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare);
    }
    let n = a.n_rows;
    let sym_tol = T::from_f64(1e-9) * a.norm_fro().max(T::one());
    if !a.is_symmetric(sym_tol) {
        return Err(LinalgError::NotSymmetric);
    }
    let mut a = a.symmetrize();
    let eps = T::epsilon() * T::from_usize(n) * a.norm_fro().max(T::one());
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= eps {
            let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
            eig.sort_by(|x, y| x.partial_cmp(y).expect("non-finite eigenvalue"));
            return Ok(eig);
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::from_f64(2.0) * apq);
                // stable tangent of the rotation angle
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(LinalgError::NoConvergence)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn symmetric_eig_min<T: Real>(a: &Mat<T>) -> Result<T, LinalgError> {
    Ok(symmetric_eigenvalues(a)?[0])
}

/// Largest eigenvalue of a symmetric matrix.
pub fn symmetric_eig_max<T: Real>(a: &Mat<T>) -> Result<T, LinalgError> {
    Ok(*symmetric_eigenvalues(a)?.last().expect("empty spectrum"))
}

/// Roots of the monic polynomial λⁿ + c[n−1]·λⁿ⁻¹ + … + c[1]·λ + c[0] by
/// Durand–Kerner iteration.
pub fn monic_roots<T: Real>(coeffs_low_to_high: &[T]) -> Result<Vec<Complex<T>>, LinalgError> {
    let n = coeffs_low_to_high.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let eval = |z: Complex<T>| -> Complex<T> {
        let mut acc = Complex::new(T::one(), T::zero());
        for &c in coeffs_low_to_high.iter().rev() {
            acc = acc * z + Complex::new(c, T::zero());
        }
        acc
    };
    // standard non-real, non-unit-modulus starting spread
    let seed = Complex::new(T::from_f64(0.4), T::from_f64(0.9));
    let mut roots: Vec<Complex<T>> = (0..n).map(|k| seed.powu(k as u32 + 1)).collect();
    let scale = coeffs_low_to_high
        .iter()
        .fold(T::one(), |m, c| m.max(c.abs()));
    let step_tol = T::epsilon() * T::from_f64(100.0) * scale;
    let snap_tol = T::epsilon() * T::from_f64(1e6);
    let mut converged = false;
    for _iter in 0..500 {
        let mut max_step = T::zero();
        for i in 0..n {
            let mut denom = Complex::new(T::one(), T::zero());
            for j in 0..n {
                if i != j {
                    denom = denom * (roots[i] - roots[j]);
                }
            }
            if denom.norm() == T::zero() {
                // perturb coincident iterates and retry next sweep
                let bump = T::from_f64(1e-8);
                roots[i] = roots[i] + Complex::new(bump, bump);
                max_step = T::max_value();
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] = roots[i] - step;
            max_step = max_step.max(step.norm());
        }
        if max_step <= step_tol {
            converged = true;
            break;
        }
    }
    // Root clusters stall the step test near √ε even though each iterate
    // already has a tiny backward error, so the acceptance test is the
    // polynomial residual against the coefficient magnitude at the root.
    if !converged {
        let res_tol = T::epsilon() * T::from_f64(1e3);
        for r in roots.iter() {
            let rn = r.norm();
            // Horner on absolute values: |r|ⁿ + Σ |c_k|·|r|^k
            let mut mag = T::one();
            for &c in coeffs_low_to_high.iter().rev() {
                mag = mag * rn + c.abs();
            }
            if !eval(*r).norm().is_finite() || eval(*r).norm() > res_tol * mag.max(T::one()) {
                return Err(LinalgError::NoConvergence);
            }
        }
    }
    // conjugate cleanup: snap near-real parts so conjugate pairs and real
    // roots come out exact to display precision
    for r in roots.iter_mut() {
        if r.im.abs() <= snap_tol * r.norm().max(T::one()) {
            r.im = T::zero();
        }
    }
    roots.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("non-finite root")
    });
    Ok(roots)
}

/// Eigenvalues of a general square matrix: Hessenberg reduction followed by
/// shifted explicit QR with 2×2 deflation.
pub fn general_eigenvalues<T: Real>(a: &Mat<T>) -> Result<Vec<Complex<T>>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare);
    }
    let n = a.n_rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let two = T::from_f64(2.0);
    let four = T::from_f64(4.0);
    let mut h = a.clone();
    // Householder reduction to upper Hessenberg
    for k in 0..n.saturating_sub(2) {
        let mut x = vec![T::zero(); n - k - 1];
        for i in k + 1..n {
            x[i - k - 1] = h[(i, k)];
        }
        let alpha = -x[0].signum() * x.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if alpha == T::zero() {
            continue;
        }
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|t| *t * *t).sum();
        if vnorm2 == T::zero() {
            continue;
        }
        // H = I − 2vvᵀ/‖v‖²; apply H·A·H
        for j in 0..n {
            let dot: T = (k + 1..n).map(|i| v[i - k - 1] * h[(i, j)]).sum();
            let f = two * dot / vnorm2;
            for i in k + 1..n {
                let delta = f * v[i - k - 1];
                h[(i, j)] -= delta;
            }
        }
        for i in 0..n {
            let dot: T = (k + 1..n).map(|j| v[j - k - 1] * h[(i, j)]).sum();
            let f = two * dot / vnorm2;
            for j in k + 1..n {
                let delta = f * v[j - k - 1];
                h[(i, j)] -= delta;
            }
        }
    }

    let hfro = h.norm_fro();
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n; // active block is l..hi
    let mut its = 0usize; // Francis sweeps since the last deflation
    let mut total = 0usize;
    while hi > 0 {
        if hi == 1 {
            eigs.push(Complex::new(h[(0, 0)], T::zero()));
            break;
        }
        // bottom-up scan for a negligible subdiagonal; it marks the top of
        // the active block
        let mut l = 0;
        for q in (1..hi).rev() {
            let scale = h[(q - 1, q - 1)].abs() + h[(q, q)].abs();
            let thresh = T::epsilon() * if scale > T::zero() { scale } else { hfro };
            if h[(q, q - 1)].abs() <= thresh {
                h[(q, q - 1)] = T::zero();
                l = q;
                break;
            }
        }
        if l == hi - 1 {
            eigs.push(Complex::new(h[(hi - 1, hi - 1)], T::zero()));
            hi -= 1;
            its = 0;
            continue;
        }
        if l == hi - 2 {
            // isolated trailing 2×2: closed form, complex pair allowed
            let a11 = h[(hi - 2, hi - 2)];
            let a12 = h[(hi - 2, hi - 1)];
            let a21 = h[(hi - 1, hi - 2)];
            let a22 = h[(hi - 1, hi - 1)];
            let tr = a11 + a22;
            let det = a11 * a22 - a12 * a21;
            let disc = tr * tr / four - det;
            if disc >= T::zero() {
                let root = disc.sqrt();
                eigs.push(Complex::new(tr / two - root, T::zero()));
                eigs.push(Complex::new(tr / two + root, T::zero()));
            } else {
                let im = (-disc).sqrt();
                eigs.push(Complex::new(tr / two, -im));
                eigs.push(Complex::new(tr / two, im));
            }
            hi -= 2;
            its = 0;
            continue;
        }

        its += 1;
        total += 1;
        if its > 40 || total > 100 * n {
            return Err(LinalgError::NoConvergence);
        }
        // implicit double shift: trace and determinant of the trailing 2×2;
        // every tenth stalled sweep uses the ad-hoc exceptional shift that
        // breaks symmetric cycling
        let (tr, det) = if its.is_multiple_of(10) {
            let mut s = h[(hi - 1, hi - 2)].abs();
            if hi >= 3 {
                s += h[(hi - 2, hi - 3)].abs();
            }
            (T::from_f64(1.5) * s, T::from_f64(-0.4375) * s * s)
        } else {
            let a11 = h[(hi - 2, hi - 2)];
            let a12 = h[(hi - 2, hi - 1)];
            let a21 = h[(hi - 1, hi - 2)];
            let a22 = h[(hi - 1, hi - 1)];
            (a11 + a22, a11 * a22 - a12 * a21)
        };
        // first column of (H−s₁I)(H−s₂I)e₁ restricted to the block; both
        // shifts enter only through tr = s₁+s₂ and det = s₁s₂, so the
        // arithmetic stays real even for a complex pair
        let mut x = h[(l, l)] * h[(l, l)] + h[(l, l + 1)] * h[(l + 1, l)] - tr * h[(l, l)] + det;
        let mut y = h[(l + 1, l)] * (h[(l, l)] + h[(l + 1, l + 1)] - tr);
        let mut z = if l + 2 < hi {
            h[(l + 2, l + 1)] * h[(l + 1, l)]
        } else {
            T::zero()
        };
        // chase the bulge down the block with 3-row reflectors
        for k in l..hi - 1 {
            let has_z = k + 2 < hi;
            if !has_z {
                z = T::zero();
            }
            let norm = (x * x + y * y + z * z).sqrt();
            if norm > T::zero() {
                let alpha = if x >= T::zero() { -norm } else { norm };
                let v0 = x - alpha;
                let v1 = y;
                let v2 = z;
                let vn2 = v0 * v0 + v1 * v1 + v2 * v2;
                if vn2 > T::zero() {
                    let beta = two / vn2;
                    if k > l {
                        // the reflector annihilates the bulge column by design
                        h[(k, k - 1)] = alpha;
                        h[(k + 1, k - 1)] = T::zero();
                        if has_z {
                            h[(k + 2, k - 1)] = T::zero();
                        }
                    }
                    for j in k..hi {
                        let mut dot = v0 * h[(k, j)] + v1 * h[(k + 1, j)];
                        if has_z {
                            dot += v2 * h[(k + 2, j)];
                        }
                        let f = beta * dot;
                        h[(k, j)] -= f * v0;
                        h[(k + 1, j)] -= f * v1;
                        if has_z {
                            h[(k + 2, j)] -= f * v2;
                        }
                    }
                    let row_end = hi.min(k + 4);
                    for i in l..row_end {
                        let mut dot = v0 * h[(i, k)] + v1 * h[(i, k + 1)];
                        if has_z {
                            dot += v2 * h[(i, k + 2)];
                        }
                        let f = beta * dot;
                        h[(i, k)] -= f * v0;
                        h[(i, k + 1)] -= f * v1;
                        if has_z {
                            h[(i, k + 2)] -= f * v2;
                        }
                    }
                }
            }
            // next bulge column
            if k + 2 < hi {
                x = h[(k + 1, k)];
                y = h[(k + 2, k)];
                z = if k + 3 < hi { h[(k + 3, k)] } else { T::zero() };
            }
        }
    }
    eigs.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("non-finite eigenvalue")
    });
    Ok(eigs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = Mat::from_rows(&[&[2.0f64, 1.0], &[1.0, 3.0]]);
        let b = Mat::from_rows(&[&[5.0], &[10.0]]);
        let x = solve(a, b).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((x[(1, 0)] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn solve_requires_pivoting() {
        let a = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let b = Mat::from_rows(&[&[2.0], &[3.0]]);
        let x = solve(a, b).unwrap();
        assert_eq!((x[(0, 0)], x[(1, 0)]), (3.0, 2.0));
    }

    #[test]
    fn solve_reports_singularity() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let b = Mat::from_rows(&[&[1.0], &[2.0]]);
        assert_eq!(solve(a, b).unwrap_err(), LinalgError::Singular);
    }

    #[test]
    fn jacobi_known_spectrum() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = Mat::from_rows(&[&[2.0f64, 1.0], &[1.0, 2.0]]);
        let e = symmetric_eigenvalues(&a).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);

        // frozen: λ((PD+DP)) for P = [[1/2,−1/2],[−1/2,1]], D = diag(1,2)
        let pdp = Mat::from_rows(&[&[1.0f64, -1.5], &[-1.5, 4.0]]);
        let e = symmetric_eigenvalues(&pdp).unwrap();
        assert!((e[0] - 0.3786796564403574).abs() < 1e-12, "{}", e[0]);
    }

    #[test]
    fn jacobi_matches_trace_and_det_on_random_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..6);
            let mut b = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    b[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
            // BᵀB + I is SPD
            let a = b.transpose().matmul(&b).add(&Mat::identity(n));
            let e = symmetric_eigenvalues(&a).unwrap();
            assert!(e[0] > 0.99, "SPD spectrum must be positive");
            let tr: f64 = (0..n).map(|i| a[(i, i)]).sum();
            let esum: f64 = e.iter().sum();
            assert!((tr - esum).abs() < 1e-9 * tr.abs().max(1.0));
        }
    }

    #[test]
    fn durand_kerner_factored_cubic() {
        // (λ+1)(λ+2)(λ+3) = λ³ + 6λ² + 11λ + 6
        let roots = monic_roots(&[6.0f64, 11.0, 6.0]).unwrap();
        let want = [-3.0, -2.0, -1.0];
        for (r, w) in roots.iter().zip(want) {
            assert!((r.re - w).abs() < 1e-9 && r.im == 0.0, "{r}");
        }
    }

    #[test]
    fn durand_kerner_complex_pair() {
        // λ² + 2λ + 5 → −1 ± 2i
        let roots = monic_roots(&[5.0f64, 2.0]).unwrap();
        assert!((roots[0].re + 1.0).abs() < 1e-10);
        assert!((roots[0].im + 2.0).abs() < 1e-10);
        assert!((roots[1].im - 2.0).abs() < 1e-10);
    }

    #[test]
    fn qr_matches_durand_kerner_on_companions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.gen_range(2..6);
            let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut comp = Mat::zeros(n, n);
            for i in 0..n {
                comp[(i, n - 1)] = -coeffs[i];
                if i + 1 < n {
                    comp[(i + 1, i)] = 1.0;
                }
            }
            let a = general_eigenvalues(&comp).unwrap();
            let b = monic_roots(&coeffs).unwrap();
            // ulp-level re-part ties make index pairing fragile for
            // conjugate pairs; match each root to its nearest unused peer
            let mut used = vec![false; b.len()];
            for x in &a {
                let (j, d) = b
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !used[*j])
                    .map(|(j, y)| (j, (x - y).norm()))
                    .min_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
                    .unwrap();
                assert!(d < 1e-6, "{x} unmatched (nearest {d})");
                used[j] = true;
            }
        }
    }

    #[test]
    fn qr_on_symmetric_matches_jacobi() {
        let a = Mat::from_rows(&[&[4.0f64, 1.0, 0.5], &[1.0, 3.0, -0.2], &[0.5, -0.2, 1.0]]);
        let qr = general_eigenvalues(&a).unwrap();
        let jac = symmetric_eigenvalues(&a).unwrap();
        for (x, y) in qr.iter().zip(&jac) {
            assert!(x.im.abs() < 1e-9);
            assert!((x.re - y).abs() < 1e-9);
        }
    }
}
