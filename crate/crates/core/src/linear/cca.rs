use serde::{Deserialize, Serialize};

use super::{check_dim, check_paired};
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};

/// Largest accepted condition number of `W_Y` when inverting it.
const MAX_CONDITION: f64 = 1e12;

/// Fitted canonical correlation analysis.
///
/// Columns of `w_x` / `w_y` are the canonical directions; `rho` holds the
/// canonical correlations in descending order, clipped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaModel {
    pub w_x: Matrix,
    pub w_y: Matrix,
    pub rho: Vec<f64>,
    pub x_mean: Vector,
    pub y_mean: Vector,
    /// Ridges added to the two covariances before whitening.
    pub ridge_x: f64,
    pub ridge_y: f64,
}

impl CcaModel {
    pub fn components(&self) -> usize {
        self.rho.len()
    }

    /// `W_X W_Y^-1`, defined only when `c` equals the target dimension.
    pub fn transform_matrix(&self) -> Result<Matrix> {
        let (dy, c) = self.w_y.shape();
        if c != dy {
            return Err(Error::NotBijective { components: c, dim: dy });
        }
        let sv = self.w_y.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || smax / smin > MAX_CONDITION {
            return Err(Error::NumericalFailure(format!(
                "W_Y is ill-conditioned (condition {:e})",
                smax / smin
            )));
        }
        let inv = self
            .w_y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("W_Y is singular".into()))?;
        Ok(&self.w_x * inv)
    }
}

fn covariance(a: &Matrix, b: &Matrix) -> Matrix {
    let denom = (a.nrows().max(2) - 1) as f64;
    a.transpose() * b / denom
}

/// Whitening ridge: zero while the covariance is comfortably invertible, the
/// standard `1e-8 * trace / d` otherwise.
fn auto_ridge(cov: &Matrix) -> f64 {
    let eig = cov.clone().symmetric_eigenvalues();
    let (lmin, lmax) = (eig.min(), eig.max());
    if lmax > 0.0 && lmin > 1e-10 * lmax {
        0.0
    } else {
        numerics::default_ridge(cov).max(f64::MIN_POSITIVE)
    }
}

/// CCA with `c` components; the whitening ridge is chosen automatically.
pub fn fit_cca(x: &Matrix, y: &Matrix, c: usize) -> Result<CcaModel> {
    fit_cca_with_ridge(x, y, c, None)
}

/// CCA through whitening: `T = Sxx^-1/2 Sxy Syy^-1/2`, whose singular values
/// are the canonical correlations. `ridge = None` picks one per side.
pub fn fit_cca_with_ridge(x: &Matrix, y: &Matrix, c: usize, ridge: Option<f64>) -> Result<CcaModel> {
    check_paired(x, y)?;
    numerics::ensure_finite(x, "CCA input")?;
    numerics::ensure_finite(y, "CCA target")?;
    let (dx, dy) = (x.ncols(), y.ncols());
    if c == 0 || c > dx.min(dy) {
        return Err(Error::invalid(format!(
            "CCA components c = {c} must lie in 1..={}",
            dx.min(dy)
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::invalid("CCA needs at least two rows"));
    }
    let x_mean = numerics::column_means(x);
    let y_mean = numerics::column_means(y);
    let xc = numerics::subtract_row(x, &x_mean);
    let yc = numerics::subtract_row(y, &y_mean);

    let sxx = covariance(&xc, &xc);
    let syy = covariance(&yc, &yc);
    let sxy = covariance(&xc, &yc);
    if sxx.amax() == 0.0 || syy.amax() == 0.0 {
        return Err(Error::DegenerateInput("constant input has no correlations".into()));
    }
    let ridge_x = ridge.unwrap_or_else(|| auto_ridge(&sxx));
    let ridge_y = ridge.unwrap_or_else(|| auto_ridge(&syy));
    let wx = numerics::inv_sqrt_psd(&sxx, ridge_x)?;
    let wy = numerics::inv_sqrt_psd(&syy, ridge_y)?;

    let t = &wx * sxy * &wy;
    let dec = numerics::svd(&t)?;
    let rho = dec.s.iter().take(c).map(|r| r.clamp(0.0, 1.0)).collect();
    Ok(CcaModel {
        w_x: wx * dec.u.columns(0, c),
        w_y: wy * dec.v.columns(0, c),
        rho,
        x_mean,
        y_mean,
        ridge_x,
        ridge_y,
    })
}

/// Map `x` into the target space: `(x - x_mean) W_X W_Y^-1 + y_mean`.
pub fn cca_transform(model: &CcaModel, x: &Matrix) -> Result<Matrix> {
    check_dim(x, model.w_x.nrows())?;
    let m = model.transform_matrix()?;
    let xc = numerics::subtract_row(x, &model.x_mean);
    Ok(numerics::add_row(&(xc * m), &model.y_mean))
}
