use serde::{Deserialize, Serialize};

use super::{check_dim, check_paired};
use crate::error::Result;
use crate::numerics::{self, Matrix, Vector};

/// Affine least-squares map `y = (x - x_mean) W + y_mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub w: Matrix,
    pub x_mean: Vector,
    pub y_mean: Vector,
}

impl LinearMap {
    pub fn identity(d: usize) -> Self {
        LinearMap {
            w: Matrix::identity(d, d),
            x_mean: Vector::zeros(d),
            y_mean: Vector::zeros(d),
        }
    }
}

/// Least-squares fit of centred `y` on centred `x`.
pub fn fit_linreg(x: &Matrix, y: &Matrix) -> Result<LinearMap> {
    check_paired(x, y)?;
    numerics::ensure_finite(x, "regression input")?;
    let x_mean = numerics::column_means(x);
    let y_mean = numerics::column_means(y);
    let xc = numerics::subtract_row(x, &x_mean);
    let yc = numerics::subtract_row(y, &y_mean);
    let w = numerics::least_squares(&xc, &yc)?;
    Ok(LinearMap { w, x_mean, y_mean })
}

pub fn apply_linear(map: &LinearMap, x: &Matrix) -> Result<Matrix> {
    check_dim(x, map.w.nrows())?;
    let xc = numerics::subtract_row(x, &map.x_mean);
    Ok(numerics::add_row(&(xc * &map.w), &map.y_mean))
}
