use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cca::fit_cca;
use super::check_paired;
use super::pwcca::pwcca;
use super::svcca::{kept_directions, DEFAULT_VARIANCE_THRESHOLD};
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Linreg,
    Cca,
    Svcca,
    Pwcca,
}

impl IndexKind {
    pub const ALL: [IndexKind; 4] = [IndexKind::Linreg, IndexKind::Cca, IndexKind::Svcca, IndexKind::Pwcca];
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexKind::Linreg => "linreg",
            IndexKind::Cca => "cca",
            IndexKind::Svcca => "svcca",
            IndexKind::Pwcca => "pwcca",
        })
    }
}

impl FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndexKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown index kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub variance_threshold: f64,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
        }
    }
}

fn basis(m: &Matrix) -> Result<Matrix> {
    numerics::orthonormal_basis(m).map_err(|e| match e {
        Error::RankZero => Error::DegenerateInput("input has rank zero after centring".into()),
        other => other,
    })
}

/// Scalar similarity in `[0, 1]` (higher is more similar) computed on centred
/// inputs:
///
/// * `linreg`: `||Q_Y^T X||_F^2 / ||X||_F^2`
/// * `cca`:    `||Q_Y^T Q_X||_F^2 / rank(X)`
/// * `svcca`:  `||(U_Y T_Y)^T U_X T_X||_F^2 / min(||T_X||_F^2, ||T_Y||_F^2)`
/// * `pwcca`:  `sum alpha_i rho_i / ||alpha||_1`
///
/// `Q` are orthonormal column-space bases, `U` left singular vectors and `T`
/// the truncated identities selecting the directions that reach
/// `params.variance_threshold` of the squared singular mass.
pub fn similarity_index(x: &Matrix, y: &Matrix, kind: IndexKind, params: &IndexParams) -> Result<f64> {
    check_paired(x, y)?;
    let xc = numerics::subtract_row(x, &numerics::column_means(x));
    let yc = numerics::subtract_row(y, &numerics::column_means(y));
    match kind {
        IndexKind::Linreg => {
            let qy = basis(&yc)?;
            let total = xc.norm_squared();
            if total == 0.0 {
                return Err(Error::DegenerateInput("X is constant".into()));
            }
            Ok((qy.transpose() * &xc).norm_squared() / total)
        }
        IndexKind::Cca => {
            let qx = basis(&xc)?;
            let qy = basis(&yc)?;
            Ok((qy.transpose() * &qx).norm_squared() / qx.ncols() as f64)
        }
        IndexKind::Svcca => {
            let sx = numerics::svd(&xc)?;
            let sy = numerics::svd(&yc)?;
            let kx = kept_directions(&sx.s, params.variance_threshold).min(sx.rank());
            let ky = kept_directions(&sy.s, params.variance_threshold).min(sy.rank());
            if kx == 0 || ky == 0 {
                return Err(Error::DegenerateInput("input has rank zero after centring".into()));
            }
            let ux = sx.u.columns(0, kx);
            let uy = sy.u.columns(0, ky);
            Ok((uy.transpose() * ux).norm_squared() / kx.min(ky) as f64)
        }
        IndexKind::Pwcca => {
            let c = basis(&xc)?.ncols().min(basis(&yc)?.ncols());
            let model = fit_cca(x, y, c)?;
            Ok(pwcca(&model, x)?.score)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn index(x: &Matrix, y: &Matrix, kind: IndexKind) -> f64 {
        similarity_index(x, y, kind, &IndexParams::default()).unwrap()
    }

    #[test]
    fn self_similarity_is_one() {
        let x = random(40, 5, 1);
        for kind in IndexKind::ALL {
            assert!((index(&x, &x, kind) - 1.0).abs() < 1e-8, "{kind}");
        }
    }

    #[test]
    fn orthogonal_column_spaces_give_zero_cca() {
        // zero-mean disjoint coordinate blocks: rows 0..3 vs rows 3..6
        let mut x = Matrix::zeros(6, 1);
        let mut y = Matrix::zeros(6, 1);
        for (i, v) in [1.0, -1.0, 0.0].iter().enumerate() {
            x[(i, 0)] = *v;
            y[(i + 3, 0)] = *v;
        }
        // centring couples the blocks through the mean, which is zero here
        assert!(index(&x, &y, IndexKind::Cca).abs() < 1e-10);
    }

    #[test]
    fn linreg_matches_regression_r2() {
        let x = random(40, 3, 2);
        let y = &x * random(3, 3, 3) + random(40, 3, 4);
        let got = index(&x, &y, IndexKind::Linreg);

        // regress centred X on centred Y by least squares
        let xc = numerics::subtract_row(&x, &numerics::column_means(&x));
        let yc = numerics::subtract_row(&y, &numerics::column_means(&y));
        let w = numerics::least_squares(&yc, &xc).unwrap();
        let explained = (&yc * w).norm_squared();
        assert!((got - explained / xc.norm_squared()).abs() < 1e-8);
    }

    #[test]
    fn indices_within_unit_interval() {
        for seed in 0..5 {
            let x = random(30, 4, seed);
            let y = random(30, 3, seed + 100);
            for kind in IndexKind::ALL {
                let v = index(&x, &y, kind);
                assert!((0.0..=1.0 + 1e-8).contains(&v), "{kind}: {v}");
            }
        }
    }

    #[test]
    fn rank_zero_is_degenerate() {
        let x = random(10, 2, 1);
        let c = Matrix::from_element(10, 2, 3.0);
        for kind in IndexKind::ALL {
            assert!(similarity_index(&x, &c, kind, &IndexParams::default()).is_err());
        }
    }

    #[test]
    fn parse_roundtrip() {
        for kind in IndexKind::ALL {
            assert_eq!(kind.to_string().parse::<IndexKind>().unwrap(), kind);
        }
        assert!("inn".parse::<IndexKind>().is_err());
    }
}
