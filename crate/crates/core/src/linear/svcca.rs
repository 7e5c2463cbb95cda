use serde::{Deserialize, Serialize};

use super::cca::{cca_transform, fit_cca, CcaModel};
use super::{check_dim, check_paired};
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.99;

/// CCA on SVD-reduced spaces.
///
/// Each centred space keeps its leading right-singular directions until the
/// retained squared singular values reach `variance_threshold` of the total
/// (`kept_x`, `kept_y`). Both spaces are then projected to the common
/// dimension `dim = max(kept_x, kept_y)` (capped by numerical rank) so that
/// the inner CCA transform is square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvccaModel {
    pub kept_x: usize,
    pub kept_y: usize,
    pub dim: usize,
    /// `d_x x dim` projection onto the retained directions of X.
    pub proj_x: Matrix,
    pub proj_y: Matrix,
    pub x_mean: Vector,
    pub y_mean: Vector,
    pub inner: CcaModel,
    pub variance_threshold: f64,
}

/// Smallest `k` whose leading squared singular values reach `threshold` of
/// the total mass.
pub(crate) fn kept_directions(s: &Vector, threshold: f64) -> usize {
    let total: f64 = s.iter().map(|v| v * v).sum();
    let mut acc = 0.0;
    for (i, v) in s.iter().enumerate() {
        acc += v * v;
        if acc >= threshold * total * (1.0 - 1e-12) {
            return i + 1;
        }
    }
    s.len()
}

pub fn fit_svcca(x: &Matrix, y: &Matrix, variance_threshold: f64) -> Result<SvccaModel> {
    check_paired(x, y)?;
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "variance threshold {variance_threshold} must lie in (0, 1]"
        )));
    }
    let x_mean = numerics::column_means(x);
    let y_mean = numerics::column_means(y);
    let xc = numerics::subtract_row(x, &x_mean);
    let yc = numerics::subtract_row(y, &y_mean);
    let sx = numerics::svd(&xc)?;
    let sy = numerics::svd(&yc)?;
    let (rank_x, rank_y) = (sx.rank(), sy.rank());
    if rank_x == 0 || rank_y == 0 {
        return Err(Error::DegenerateInput("constant input has no directions".into()));
    }
    let kept_x = kept_directions(&sx.s, variance_threshold).min(rank_x);
    let kept_y = kept_directions(&sy.s, variance_threshold).min(rank_y);
    let dim = kept_x.max(kept_y).min(rank_x).min(rank_y);
    let proj_x = sx.v.columns(0, dim).into_owned();
    let proj_y = sy.v.columns(0, dim).into_owned();
    let inner = fit_cca(&(xc * &proj_x), &(yc * &proj_y), dim)?;
    Ok(SvccaModel {
        kept_x,
        kept_y,
        dim,
        proj_x,
        proj_y,
        x_mean,
        y_mean,
        inner,
        variance_threshold,
    })
}

impl SvccaModel {
    pub fn rho(&self) -> &[f64] {
        &self.inner.rho
    }

    pub fn reduce_x(&self, x: &Matrix) -> Result<Matrix> {
        check_dim(x, self.proj_x.nrows())?;
        Ok(numerics::subtract_row(x, &self.x_mean) * &self.proj_x)
    }

    pub fn reduce_y(&self, y: &Matrix) -> Result<Matrix> {
        check_dim(y, self.proj_y.nrows())?;
        Ok(numerics::subtract_row(y, &self.y_mean) * &self.proj_y)
    }

    /// Map `x` into the reduced Y space (compare against [`Self::reduce_y`]).
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        cca_transform(&self.inner, &self.reduce_x(x)?)
    }
}
