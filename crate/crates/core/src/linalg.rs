//! Dense complex linear algebra helpers built on `faer`.
//!
//! Every routine works on owned `Mat<c64>` values so that callers never need
//! to juggle views. Vectors are carried as single-column matrices or `Vec<c64>`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, Side};

use crate::error::PhsError;

/// Complex zero.
pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
/// Complex one.
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
/// Imaginary unit.
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

/// Builds a real scalar as a complex number.
#[inline]
pub fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

/// Builds a complex matrix from row-major nested slices of complex entries.
pub fn from_rows(rows: &[Vec<c64>]) -> Mat<c64> {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

/// Builds a complex matrix from row-major nested slices of real entries.
pub fn from_real_rows(rows: &[&[f64]]) -> Mat<c64> {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(r, c, |i, j| re(rows[i][j]))
}

/// Converts a real matrix into a complex one.
pub fn complexify(a: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| re(a[(i, j)]))
}

/// Conjugate transpose.
pub fn adjoint(a: &Mat<c64>) -> Mat<c64> {
    a.adjoint().to_owned()
}

/// Multiplies every entry by `s`.
pub fn scale(a: &Mat<c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// Hermitian part ½(A + A*).
pub fn hermitian_part(a: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

/// Largest entry modulus.
pub fn norm_max(a: &Mat<c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Frobenius norm.
pub fn norm_fro(a: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Spectral norm (largest singular value).
pub fn norm2(a: &Mat<c64>) -> Result<f64, PhsError> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Euclidean norm of a vector.
pub fn vec_norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix-vector product.
pub fn matvec(a: &Mat<c64>, v: &[c64]) -> Vec<c64> {
    assert_eq!(a.ncols(), v.len(), "matvec dimension mismatch");
    (0..a.nrows())
        .map(|i| {
            let mut s = ZERO;
            for (j, vj) in v.iter().enumerate() {
                s += a[(i, j)] * vj;
            }
            s
        })
        .collect()
}

/// Hermitian inner product `u* v`.
pub fn dot(u: &[c64], v: &[c64]) -> c64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Quadratic form `v* A v`.
pub fn quad_form(a: &Mat<c64>, v: &[c64]) -> c64 {
    dot(v, &matvec(a, v))
}

/// Column vector from a slice.
pub fn col(v: &[c64]) -> Mat<c64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Extracts column `j` as a vector.
pub fn column(a: &Mat<c64>, j: usize) -> Vec<c64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

/// Stacks matrices vertically; all blocks must share the column count.
pub fn vstack(blocks: &[&Mat<c64>]) -> Mat<c64> {
    let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        assert!(b.nrows() == 0 || b.ncols() == cols, "vstack column mismatch");
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                out[(r0 + i, j)] = b[(i, j)];
            }
        }
        r0 += b.nrows();
    }
    out
}

/// Stacks matrices horizontally; all blocks must share the row count.
pub fn hstack(blocks: &[&Mat<c64>]) -> Mat<c64> {
    let rows = blocks.iter().map(|b| b.nrows()).max().unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        assert!(b.ncols() == 0 || b.nrows() == rows, "hstack row mismatch");
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                out[(i, c0 + j)] = b[(i, j)];
            }
        }
        c0 += b.ncols();
    }
    out
}

/// Copies the sub-block with the given row and column ranges.
pub fn block(a: &Mat<c64>, r0: usize, nr: usize, c0: usize, nc: usize) -> Mat<c64> {
    Mat::from_fn(nr, nc, |i, j| a[(r0 + i, c0 + j)])
}

/// Writes `b` into `a` at offset `(r0, c0)`.
pub fn set_block(a: &mut Mat<c64>, r0: usize, c0: usize, b: &Mat<c64>) {
    for j in 0..b.ncols() {
        for i in 0..b.nrows() {
            a[(r0 + i, c0 + j)] = b[(i, j)];
        }
    }
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[&Mat<c64>]) -> Mat<c64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        set_block(&mut out, r0, c0, b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Kronecker product of a real matrix with a complex matrix.
pub fn kron_real(a: &Mat<f64>, b: &Mat<c64>) -> Mat<c64> {
    let (p, q) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * p, a.ncols() * q, |i, j| {
        b[(i % p, j % q)] * a[(i / p, j / q)]
    })
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &Mat<c64>) -> Result<Vec<f64>, PhsError> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| PhsError::EigenSolverFailure(format!("svd: {e:?}")))
}

/// Numerical rank with singular values above `rel_tol · σ_max`.
pub fn rank(a: &Mat<c64>, rel_tol: f64) -> Result<usize, PhsError> {
    let s = singular_values(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * smax).count())
}

/// Factors `(U, s, V)` of a singular value decomposition.
pub type Svd = (Mat<c64>, Vec<f64>, Mat<c64>);

/// Full singular value decomposition `A = U diag(s) V*`.
pub fn svd(a: &Mat<c64>) -> Result<Svd, PhsError> {
    let d = a
        .svd()
        .map_err(|e| PhsError::EigenSolverFailure(format!("svd: {e:?}")))?;
    let s: Vec<f64> = d.S().column_vector().iter().map(|z| z.re).collect();
    Ok((d.U().to_owned(), s, d.V().to_owned()))
}

/// Orthonormal basis of the null space of `a`, using a relative singular value cut.
///
/// Returns the basis together with the numerical rank.
pub fn null_space(a: &Mat<c64>, rel_tol: f64) -> Result<(Mat<c64>, usize), PhsError> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok((Mat::identity(n, n), 0));
    }
    let (_, s, v) = svd(a)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let r = if smax == 0.0 {
        0
    } else {
        s.iter().filter(|&&x| x > rel_tol * smax).count()
    };
    Ok((block(&v, 0, n, r, n - r), r))
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and eigenvectors.
pub fn herm_eig(a: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>), PhsError> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let h = hermitian_part(a);
    let e = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| PhsError::EigenSolverFailure(format!("hermitian evd: {e:?}")))?;
    let vals: Vec<f64> = e.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, e.U().to_owned()))
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn herm_eigvals(a: &Mat<c64>) -> Result<Vec<f64>, PhsError> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    hermitian_part(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| PhsError::EigenSolverFailure(format!("hermitian evd: {e:?}")))
}

/// Eigenvalues of a general complex matrix.
pub fn eigvals(a: &Mat<c64>) -> Result<Vec<c64>, PhsError> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.eigenvalues()
        .map_err(|e| PhsError::EigenSolverFailure(format!("evd: {e:?}")))
}

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub fn eig(a: &Mat<c64>) -> Result<(Vec<c64>, Mat<c64>), PhsError> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let e = a
        .eigen()
        .map_err(|e| PhsError::EigenSolverFailure(format!("evd: {e:?}")))?;
    let vals: Vec<c64> = e.S().column_vector().iter().copied().collect();
    Ok((vals, e.U().to_owned()))
}

/// Solves `A X = B` with partial-pivoting LU.
pub fn solve(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a.partial_piv_lu().solve(b)
}

/// Inverse via partial-pivoting LU.
pub fn inverse(a: &Mat<c64>) -> Mat<c64> {
    a.partial_piv_lu().inverse()
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub fn herm_fn(a: &Mat<c64>, f: impl Fn(f64) -> f64) -> Result<Mat<c64>, PhsError> {
    let (vals, u) = herm_eig(a)?;
    let n = vals.len();
    let d = Mat::from_fn(n, n, |i, j| if i == j { re(f(vals[i])) } else { ZERO });
    Ok(&u * &d * u.adjoint())
}

/// Outcome of a semidefiniteness test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DefinitenessCheck {
    /// Whether the test passed.
    pub passed: bool,
    /// The extreme eigenvalue that decided the test.
    pub eigenvalue: f64,
    /// Tolerance used.
    pub tolerance: f64,
}

/// `M ⪰ 0` iff `λ_min(M) ≥ −tol·(1 + ‖M‖)`.
pub fn psd_check(m: &Mat<c64>, tol: f64) -> Result<DefinitenessCheck, PhsError> {
    let vals = herm_eigvals(m)?;
    let lmin = vals.first().copied().unwrap_or(0.0);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let t = tol * (1.0 + scale);
    Ok(DefinitenessCheck { passed: lmin >= -t, eigenvalue: lmin, tolerance: t })
}

/// `M ⪯ 0` iff `λ_max(M) ≤ tol·(1 + ‖M‖)`.
pub fn nsd_check(m: &Mat<c64>, tol: f64) -> Result<DefinitenessCheck, PhsError> {
    let vals = herm_eigvals(m)?;
    let lmax = vals.last().copied().unwrap_or(0.0);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let t = tol * (1.0 + scale);
    Ok(DefinitenessCheck { passed: lmax <= t, eigenvalue: lmax, tolerance: t })
}
