//! Dense linear-algebra kernels used by the linear aligners.
//!
//! All routines work in double precision on [`Matrix`] (a dynamically sized
//! nalgebra matrix) and reject non-finite input up front.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values at or below `RANK_TOL * s_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

const SVD_MAX_ITER: usize = 10_000;

/// Thin singular value decomposition `m = u * diag(s) * v^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    /// Non-negative, sorted descending.
    pub s: Vector,
    pub v: Matrix,
}

impl Svd {
    /// Number of singular values above the relative cutoff.
    pub fn rank(&self) -> usize {
        let smax = self.s.iter().copied().fold(0.0, f64::max);
        if smax == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&s| s > RANK_TOL * smax).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        &self.u * Matrix::from_diagonal(&self.s) * self.v.transpose()
    }
}

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite values")))
    }
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    ensure_finite(m, "svd input")?;
    let mut dec = SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    dec.sort_by_singular_values();
    let u = dec.u.take().expect("u requested");
    let v_t = dec.v_t.take().expect("v requested");
    Ok(Svd {
        u,
        s: dec.singular_values,
        v: v_t.transpose(),
    })
}

/// Orthonormal basis of the column space of `m`, one column per numerically
/// non-zero singular value.
pub fn orthonormal_basis(m: &Matrix) -> Result<Matrix> {
    let dec = svd(m)?;
    let rank = dec.rank();
    if rank == 0 {
        return Err(Error::RankZero);
    }
    Ok(dec.u.columns(0, rank).into_owned())
}

/// Minimum-norm solution of `min_W ||A W - B||_F` through the SVD
/// pseudoinverse.
pub fn least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::invalid(format!(
            "least squares: A has {} rows but B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    ensure_finite(b, "least squares target")?;
    let dec = svd(a)?;
    let rank = dec.rank();
    if rank == 0 {
        return Ok(Matrix::zeros(a.ncols(), b.ncols()));
    }
    let u = dec.u.columns(0, rank);
    let v = dec.v.columns(0, rank);
    let mut ut_b = u.transpose() * b;
    for (i, mut row) in ut_b.row_iter_mut().enumerate() {
        row /= dec.s[i];
    }
    Ok(v * ut_b)
}

/// The ridge used when a covariance needs regularising before whitening:
/// `1e-8 * trace(S) / d`.
pub fn default_ridge(s: &Matrix) -> f64 {
    1e-8 * s.trace() / s.nrows().max(1) as f64
}

/// `(S + ridge I)^(-1/2)` for a symmetric positive semi-definite `S`.
pub fn inv_sqrt_psd(s: &Matrix, ridge: f64) -> Result<Matrix> {
    if !s.is_square() || s.nrows() == 0 {
        return Err(Error::invalid("inv_sqrt_psd needs a non-empty square matrix"));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid("ridge must be a finite non-negative number"));
    }
    ensure_finite(s, "inv_sqrt_psd input")?;
    let scale = s.amax().max(1.0);
    let asym = (s - s.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::invalid(format!(
            "inv_sqrt_psd input is not symmetric (max |S - S^T| = {asym:e})"
        )));
    }
    let n = s.nrows();
    let shifted = (s + s.transpose()) * 0.5 + Matrix::identity(n, n) * ridge;
    let eig = SymmetricEigen::try_new(shifted, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let lmax = eig.eigenvalues.amax();
    let mut inv_sqrt = Vector::zeros(n);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l < -1e-8 {
            return Err(Error::NotPsd(l));
        }
        if l <= f64::EPSILON * n as f64 * lmax || l <= 0.0 {
            return Err(Error::NumericalFailure(format!(
                "matrix is singular (eigenvalue {l:e}); add a ridge"
            )));
        }
        inv_sqrt[i] = 1.0 / l.sqrt();
    }
    let q = &eig.eigenvectors;
    let mut out = q * Matrix::from_diagonal(&inv_sqrt) * q.transpose();
    out = (&out + out.transpose()) * 0.5;
    Ok(out)
}

pub fn column_means(m: &Matrix) -> Vector {
    let n = m.nrows().max(1) as f64;
    Vector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub fn subtract_row(m: &Matrix, v: &Vector) -> Matrix {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-v[j]);
    }
    out
}

pub fn add_row(m: &Matrix, v: &Vector) -> Matrix {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(v[j]);
    }
    out
}
