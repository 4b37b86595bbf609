//! Dense complex Hermitian linear algebra.
//!
//! Everything downstream works with small (N <= 16) Hermitian matrices:
//! spatial correlation matrices, the constraint matrices of the dual problem
//! and the beamforming matrices. This module provides the handful of kernels
//! those need: eigendecomposition, a PSD test, the Perron root of a
//! nonnegative matrix, and `mu_plus(A, B)`, the minimum non-negative
//! eigenvalue of the Hermitian pencil `A - mu B`.

use nalgebra::{Cholesky, DMatrix, DVector};
pub use num_complex::Complex64;
use std::fmt;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative asymmetry accepted by [`HermitianMatrix::new`] before it
/// symmetrizes.
pub const ASYMMETRY_TOL: f64 = 1e-12;

const EIG_MAX_ITER: usize = 10_000;

/// Square complex matrix equal to its conjugate transpose.
///
/// The stored entries are exactly Hermitian: construction averages the input
/// with its conjugate transpose, which absorbs round-off from upstream
/// arithmetic and is a bit-exact no-op on inputs that are already Hermitian.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    data: CMatrix,
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianMatrix{}", self.data)
    }
}

impl HermitianMatrix {
    /// Validates squareness, finiteness and Hermitian symmetry (relative
    /// asymmetry at most [`ASYMMETRY_TOL`]), then symmetrizes.
    pub fn new(data: CMatrix) -> Result<Self> {
        if !data.is_square() {
            return Err(Error::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = data.norm();
        let asym = (&data - data.adjoint()).norm();
        if asym > ASYMMETRY_TOL * norm {
            return Err(Error::NotHermitian(if norm > 0.0 { asym / norm } else { asym }));
        }
        Ok(Self::symmetrize(data))
    }

    /// Averages with the conjugate transpose without checking the asymmetry.
    /// Intended for matrices that are Hermitian up to round-off by
    /// construction.
    pub fn symmetrize(data: CMatrix) -> Self {
        assert!(data.is_square(), "symmetrize needs a square matrix");
        let n = data.nrows();
        let mut out = data.clone();
        for r in 0..n {
            out[(r, r)] = Complex64::new(data[(r, r)].re, 0.0);
            for c in (r + 1)..n {
                let v = (data[(r, c)] + data[(c, r)].conj()) * 0.5;
                out[(r, c)] = v;
                out[(c, r)] = v.conj();
            }
        }
        Self { data: out }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: CMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: CMatrix::zeros(n, n),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = CMatrix::zeros(n, n);
        for (k, &d) in diag.iter().enumerate() {
            data[(k, k)] = Complex64::new(d, 0.0);
        }
        Self { data }
    }

    /// Real symmetric matrix given row-major.
    pub fn from_real_rows(n: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: rows.len(),
            });
        }
        Self::new(CMatrix::from_fn(n, n, |r, c| Complex64::new(rows[r * n + c], 0.0)))
    }

    /// Rank-one matrix `a a^H`.
    pub fn outer(a: &CVector) -> Self {
        Self::symmetrize(a * a.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            data: &self.data * Complex64::new(alpha, 0.0),
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &HermitianMatrix) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in add_scaled");
        let a = Complex64::new(alpha, 0.0);
        self.data.zip_apply(&other.data, |x, y| *x += a * y);
    }

    /// Real part of `x^H H x` (the imaginary part is zero up to round-off).
    pub fn quad_form(&self, x: &CVector) -> f64 {
        let hx = &self.data * x;
        x.iter().zip(hx.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.data[(k, k)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }
}

/// Eigenvalues in ascending order with the matching unit eigenvectors as
/// columns of a unitary matrix.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn eigenvector(&self, k: usize) -> CVector {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("empty decomposition")
    }

    /// Largest eigenvalue magnitude, i.e. the spectral norm.
    pub fn spectral_norm(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// `V diag(beta) V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (k, &b) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(b);
        }
        &scaled * self.eigenvectors.adjoint()
    }
}

pub fn eig_hermitian(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = h.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = h
        .data
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::EigenNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Smallest eigenvalue of `h`.
pub fn min_eigenvalue(h: &HermitianMatrix) -> Result<f64> {
    Ok(eig_hermitian(h)?.min())
}

/// True iff the smallest eigenvalue is at least `-tol * max(1, ||H||_2)`.
pub fn is_psd(h: &HermitianMatrix, tol: f64) -> bool {
    debug_assert!(tol >= 0.0);
    match eig_hermitian(h) {
        Ok(e) if !e.eigenvalues.is_empty() => e.min() >= -tol * e.spectral_norm().max(1.0),
        Ok(_) => true,
        Err(_) => false,
    }
}

/// Default tolerance for PSD tests on pencil members.
pub const PSD_TOL: f64 = 1e-12;

/// Minimum non-negative eigenvalue of the pencil `A - mu B` for `A > 0`,
/// `B >= 0`, together with the minimizer of `x^H A x` over `x^H B x = 1`.
#[derive(Clone, Debug)]
pub struct PencilEigenResult {
    pub mu_plus: f64,
    pub minimizer: CVector,
}

/// Computes `mu_plus(A, B) = min { x^H A x : x^H B x = 1 }`.
///
/// With `A = L L^H`, substituting `x = L^{-H} y` turns the problem into
/// `min |y|^2` subject to `y^H C y = 1` with `C = L^{-1} B L^{-H}`, whose
/// value is `1 / lambda_max(C)`. Singular `B` needs no special treatment:
/// its null space only contributes zero eigenvalues of `C`.
pub fn min_nonneg_pencil_eig(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<PencilEigenResult> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.dim(),
        });
    }
    let chol = Cholesky::new(a.data.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    if l.diagonal()
        .iter()
        .any(|d| !(d.re > 0.0) || d.im != 0.0 || !d.re.is_finite())
    {
        return Err(Error::NotPositiveDefinite);
    }
    // C = L^{-1} B L^{-H} = L^{-1} (L^{-1} B^H)^H, and B^H = B.
    let lb = l.solve_lower_triangular(&b.data).ok_or(Error::NotPositiveDefinite)?;
    let c = l
        .solve_lower_triangular(&lb.adjoint())
        .ok_or(Error::NotPositiveDefinite)?;
    let eig = eig_hermitian(&HermitianMatrix::symmetrize(c))?;
    let nu_max = eig.max();
    if !(nu_max > 0.0) || !nu_max.is_finite() {
        return Err(Error::DegeneratePencil);
    }
    let u = eig.eigenvector(n - 1);
    let x = l
        .adjoint()
        .solve_upper_triangular(&u)
        .ok_or(Error::NotPositiveDefinite)?
        / Complex64::new(nu_max.sqrt(), 0.0);
    Ok(PencilEigenResult {
        mu_plus: 1.0 / nu_max,
        minimizer: normalize_phase(x),
    })
}

/// `is_psd(A - mu B)`; holds iff `mu <= mu_plus(A, B)`
/// for `mu >= 0`.
pub fn pencil_psd_equiv_check(a: &HermitianMatrix, b: &HermitianMatrix, mu: f64) -> bool {
    let mut m = a.clone();
    m.add_scaled(-mu, b);
    is_psd(&m, PSD_TOL)
}

/// Rotates `x` so that its largest-magnitude component is real positive.
pub fn normalize_phase(mut x: CVector) -> CVector {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (k, z) in x.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag {
            best = k;
            best_mag = mag;
        }
    }
    if best_mag > 0.0 {
        let phase = x[best] / best_mag;
        let rot = phase.conj();
        x.apply(|z| *z *= rot);
        x[best] = Complex64::new(x[best].re, 0.0);
    }
    x
}

/// Perron root (spectral radius) of an entrywise nonnegative square matrix.
///
/// Power iteration on `M + I`: its dominant eigenvalue `rho + 1` is strictly
/// largest in modulus, and for a positive iterate the Collatz-Wielandt ratios
/// bracket it. Falls back to a full real Schur eigensolve when the bracket
/// stalls (reducible matrices with several equal blocks).
pub fn spectral_radius_nonneg(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius needs a square matrix");
    debug_assert!(m.iter().all(|&v| v >= 0.0), "matrix must be nonnegative");
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let shifted = m / scale + DMatrix::<f64>::identity(n, n);
    let mut x = DVector::<f64>::from_element(n, 1.0);
    let mut upper_prev = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..20_000 {
        let y = &shifted * &x;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for k in 0..n {
            let r = y[k] / x[k];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= 1e-14 * hi {
            return (0.5 * (hi + lo) - 1.0) * scale;
        }
        if (upper_prev - hi).abs() <= 1e-16 * hi {
            stalled += 1;
            if stalled > 50 {
                break;
            }
        } else {
            stalled = 0;
        }
        upper_prev = hi;
        let norm = y.amax();
        x = y / norm;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}
