//! Synthetic data with known ground truth.

use rand_distr::{Distribution, StandardNormal};

use crate::embedding::{EmbeddingSet, SetMeta};
use crate::error::{Error, Result};
use crate::inn::{random_inn, InnModel};
use crate::numerics::Matrix;
use crate::rng::{self, child_seed, Stream};

pub const SYNTH_DATASET: &str = "synthetic";

/// `n x dim` standard-normal rows from the data stream of `seed`.
pub fn gaussian_matrix(n: usize, dim: usize, seed: u64) -> Matrix {
    let mut rng = rng::stream(seed, Stream::Data);
    Matrix::from_fn(n, dim, |_, _| StandardNormal.sample(&mut rng))
}

/// Source X, target `Y = gt(X)` and the ground-truth model `gt`, all seeded
/// by `seed`.
pub fn recovery_problem(n: usize, dim: usize, gt_layers: usize, seed: u64) -> Result<(Matrix, Matrix, InnModel<f64>)> {
    if n < 2 {
        return Err(Error::invalid("synthetic problems need at least two rows"));
    }
    let gt = random_inn::<f64>(dim, gt_layers, seed)?;
    let x = gaussian_matrix(n, dim, seed);
    let y = gt.forward(&x)?;
    Ok((x, y, gt))
}

/// A collection of `models x layers` sets imitating several training seeds of
/// one network. Layer `l` of the shared backbone is `G_l(... G_1(X))` with
/// one random coupling map per step; model `m` sees layer `l` through its own
/// single-layer random map. Model seeds are `1..=models`.
pub fn synthetic_collection(models: usize, layers: usize, n: usize, dim: usize, seed: u64) -> Result<Vec<EmbeddingSet>> {
    if models == 0 || layers == 0 {
        return Err(Error::invalid("need at least one model and one layer"));
    }
    if layers > crate::embedding::MAX_LAYER as usize {
        return Err(Error::invalid(format!("at most {} layers", crate::embedding::MAX_LAYER)));
    }
    let mut backbone = gaussian_matrix(n, dim, seed);
    let mut sets = Vec::with_capacity(models * layers);
    for layer in 1..=layers {
        let step = random_inn::<f64>(dim, 2, child_seed(seed, layer as u64))?;
        backbone = step.forward(&backbone)?;
        for m in 1..=models {
            let variant_seed = child_seed(child_seed(seed, 1000 + m as u64), layer as u64);
            let variant = random_inn::<f64>(dim, 1, variant_seed)?;
            let meta = SetMeta::new(format!("synth-m{m}"), m as u64, layer as u32, SYNTH_DATASET);
            sets.push(EmbeddingSet::new(variant.forward(&backbone)?, meta)?);
        }
    }
    Ok(sets)
}
