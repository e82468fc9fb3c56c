//! Dense complex Hermitian linear algebra.
//!
//! Everything in the solver is built from the handful of kernels here:
//! spectral decomposition, spectral matrix functions (`exp`, `log`, inverse
//! square roots), Kronecker products and the two partial traces of a
//! bipartite operator.
//!
//! Bipartite index convention: for `C` acting on `C^n ⊗ C^m` the row index of
//! `|i⟩⊗|k⟩` is `i * m + k`, i.e. the first factor (system R) is major.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for accepting a matrix as Hermitian on construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues below this are clamped before taking a scalar logarithm.
pub const LOG_FLOOR: f64 = 1e-300;
/// Eigenvalues below `-LOG_NEGATIVE_TOL` are rejected by [`mat_log`].
pub const LOG_NEGATIVE_TOL: f64 = 1e-10;
/// Largest eigenvalue [`mat_exp`] accepts before `e^λ` overflows an f64.
pub const EXP_MAX_EIGENVALUE: f64 = 709.0;

const SINGULAR_TOL: f64 = 1e-14;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Square complex matrix with `A = A^H`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    data: CMatrix,
}

impl HermitianMatrix {
    /// Validates Hermiticity within `1e-12 * max(1, max|a_ij|)` and
    /// symmetrizes the result.
    pub fn new(data: CMatrix) -> Result<Self> {
        Self::with_tolerance(data, HERMITIAN_TOL)
    }

    pub fn with_tolerance(data: CMatrix, rel_tol: f64) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::NotSquare {
                rows: data.nrows(),
                cols: data.ncols(),
            });
        }
        if data.nrows() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = data.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let deviation = hermitian_deviation(&data);
        if deviation > rel_tol * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::symmetrized(data))
    }

    /// Replaces `m` with `(m + m^H) / 2` without validation.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        let data = (m + adj) * c(0.5);
        Self { data }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: CMatrix::zeros(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            data[(i, i)] = c(d);
        }
        Self { data }
    }

    /// Builds a matrix from a real part and an imaginary part given as rows.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>], rel_tol: f64) -> Result<Self> {
        let n = re.len();
        if im.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: im.len(),
            });
        }
        for row in re.iter().chain(im.iter()) {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        let data = CMatrix::from_fn(n, n, |i, j| Complex64::new(re[i][j], im[i][j]));
        Self::with_tolerance(data, rel_tol)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    /// `Re Tr(self · other)` computed without forming the product.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        trace_product(&self.data, &other.data)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            data: &self.data * c(factor),
        }
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self {
            data: &self.data - &other.data,
        }
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift(&self, shift: f64) -> Self {
        let mut data = self.data.clone();
        for i in 0..data.nrows() {
            data[(i, i)] += shift;
        }
        Self { data }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    /// Sum of moduli of the off-diagonal entries.
    pub fn off_diagonal_mass(&self) -> f64 {
        let n = self.dim();
        let mut mass = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    mass += self.data[(i, j)].norm();
                }
            }
        }
        mass
    }

    /// `U self U^H` for a square `U`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::symmetrized(u * &self.data * u.adjoint())
    }

    pub fn kron(&self, other: &HermitianMatrix) -> Self {
        Self {
            data: kron(&self.data, &other.data),
        }
    }

    pub fn partial_trace_first(&self, n: usize, m: usize) -> Result<Self> {
        partial_trace_first(&self.data, n, m).map(Self::symmetrized)
    }

    pub fn partial_trace_second(&self, n: usize, m: usize) -> Result<Self> {
        partial_trace_second(&self.data, n, m).map(Self::symmetrized)
    }
}

/// Largest entry of `|A - A^H|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `Re Tr(A B)` in O(n^2).
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let p = a[(i, k)] * b[(k, i)];
            acc += p.re;
        }
    }
    acc
}

/// Eigenvalues ascending, paired column-wise with a unitary eigenvector matrix.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `U diag(f(λ)) U^H`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> HermitianMatrix {
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.reweight(&weights)
    }

    /// `U diag(w) U^H` for an explicit weight vector.
    pub fn reweight(&self, weights: &[f64]) -> HermitianMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= c(weights[j]);
        }
        HermitianMatrix::symmetrized(scaled * self.eigenvectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.reweight(&self.eigenvalues)
    }
}

/// Full Hermitian eigendecomposition, eigenvalues sorted ascending.
pub fn eigh(a: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let n = a.dim();
    let max_iter = 1000 * n.max(10);
    let eig = SymmetricEigen::try_new(a.data.clone(), f64::EPSILON, max_iter).ok_or_else(|| {
        let diag: Vec<f64> = a.diagonal().iter().map(|d| d.abs()).collect();
        let hi = diag.iter().cloned().fold(0.0, f64::max);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        Error::EigenFailure {
            dim: n,
            condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Matrix exponential of an already decomposed matrix.
pub fn exp_from_spectrum(s: &SpectralDecomposition) -> Result<HermitianMatrix> {
    let max = s.max();
    if !max.is_finite() || max > EXP_MAX_EIGENVALUE {
        return Err(Error::ExpOverflow {
            max_eigenvalue: max,
        });
    }
    Ok(s.map(f64::exp))
}

pub fn mat_exp(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    exp_from_spectrum(&eigh(a)?)
}

/// Matrix logarithm of a PSD matrix with eigenvalues floored at [`LOG_FLOOR`].
pub fn mat_log(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let s = eigh(a)?;
    log_from_spectrum(&s)
}

pub fn log_from_spectrum(s: &SpectralDecomposition) -> Result<HermitianMatrix> {
    if s.min() < -LOG_NEGATIVE_TOL {
        return Err(Error::LogDomain {
            min_eigenvalue: s.min(),
        });
    }
    Ok(s.map(|l| l.max(LOG_FLOOR).ln()))
}

/// PSD square root, negative rounding noise clamped to zero.
pub fn sqrt_psd(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let s = eigh(a)?;
    if s.min() < -LOG_NEGATIVE_TOL {
        return Err(Error::LogDomain {
            min_eigenvalue: s.min(),
        });
    }
    Ok(s.map(|l| l.max(0.0).sqrt()))
}

/// `(A + αI)^{-1/2}` for PSD `A`.
pub fn inv_sqrt_psd(a: &HermitianMatrix, alpha: f64) -> Result<HermitianMatrix> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "regularization alpha must be >= 0, got {alpha}"
        )));
    }
    let s = eigh(a)?;
    let lo = s.min();
    if lo < -LOG_NEGATIVE_TOL {
        return Err(Error::LogDomain { min_eigenvalue: lo });
    }
    if alpha == 0.0 && lo <= SINGULAR_TOL {
        return Err(Error::Singular { min_eigenvalue: lo });
    }
    if lo + alpha <= 0.0 {
        return Err(Error::Singular {
            min_eigenvalue: lo + alpha,
        });
    }
    Ok(s.map(|l| (l.max(0.0) + alpha).powf(-0.5)))
}

/// `(A ⊗ B)[(i*m + k), (j*m + l)] = A[i][j] * B[k][l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn check_bipartite(c: &CMatrix, n: usize, m: usize) -> Result<()> {
    if c.nrows() != c.ncols() {
        return Err(Error::NotSquare {
            rows: c.nrows(),
            cols: c.ncols(),
        });
    }
    if n == 0 || m == 0 || c.nrows() != n * m {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            found: c.nrows(),
        });
    }
    Ok(())
}

/// Trace over the first (R, dimension `n`) factor; the result is `m × m`.
pub fn partial_trace_first(c: &CMatrix, n: usize, m: usize) -> Result<CMatrix> {
    check_bipartite(c, n, m)?;
    let mut out = CMatrix::zeros(m, m);
    for i in 0..n {
        for l in 0..m {
            for k in 0..m {
                out[(k, l)] += c[(i * m + k, i * m + l)];
            }
        }
    }
    Ok(out)
}

/// Trace over the second (B, dimension `m`) factor; the result is `n × n`.
pub fn partial_trace_second(c: &CMatrix, n: usize, m: usize) -> Result<CMatrix> {
    check_bipartite(c, n, m)?;
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                acc += c[(i * m + k, j * m + k)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

pub fn entrywise_one_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

/// Smallest eigenvalue.
pub fn min_eigenvalue(a: &HermitianMatrix) -> Result<f64> {
    Ok(eigh(a)?.min())
}
