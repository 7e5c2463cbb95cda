use serde::{Deserialize, Serialize};

use super::cca::CcaModel;
use super::check_dim;
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

/// Projection-weighted average of canonical correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwccaResult {
    pub alpha: Vec<f64>,
    pub score: f64,
}

/// Weight each canonical correlation by how much its canonical variate
/// `p_i = X_c w_X^i` overlaps the (centred) columns of X:
/// `alpha_i = sum_j |<p_i, x_j>|`, `score = sum alpha_i rho_i / sum alpha_i`.
pub fn pwcca(model: &CcaModel, x: &Matrix) -> Result<PwccaResult> {
    check_dim(x, model.w_x.nrows())?;
    let xc = numerics::subtract_row(x, &model.x_mean);
    let variates = &xc * &model.w_x;
    let overlaps = variates.transpose() * &xc;
    let alpha: Vec<f64> = overlaps
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum())
        .collect();
    let total: f64 = alpha.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput(
            "all projection weights are zero".into(),
        ));
    }
    let score = alpha.iter().zip(&model.rho).map(|(a, r)| a * r).sum::<f64>() / total;
    Ok(PwccaResult { alpha, score })
}
