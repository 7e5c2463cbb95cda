//! Linear alignment baselines and the closed-form similarity indices.
//!
//! Every method centres its inputs first; fitted models carry the removed
//! means so new data can be mapped consistently.

mod cca;
mod index;
mod pwcca;
mod regression;
mod svcca;

pub use cca::{cca_transform, fit_cca, fit_cca_with_ridge, CcaModel};
pub use index::{similarity_index, IndexKind, IndexParams};
pub use pwcca::{pwcca, PwccaResult};
pub use regression::{apply_linear, fit_linreg, LinearMap};
pub use svcca::{fit_svcca, SvccaModel, DEFAULT_VARIANCE_THRESHOLD};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub(crate) fn check_paired(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::invalid(format!(
            "paired sets need equal row counts, got {} and {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::invalid("empty input"));
    }
    Ok(())
}

pub(crate) fn check_dim(x: &Matrix, d: usize) -> Result<()> {
    if x.ncols() != d {
        return Err(Error::invalid(format!(
            "expected {d} columns, got {}",
            x.ncols()
        )));
    }
    Ok(())
}
