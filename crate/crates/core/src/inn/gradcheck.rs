use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::model::{GradientBundle, InnModel};
use crate::error::Result;
use crate::rng::{self, Stream};

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Flat index of the worst parameter.
    pub worst_index: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Errors below this absolute size are finite-difference noise, not bugs.
const ABS_FLOOR: f64 = 1e-8;

/// Central-difference gradient of the loss for every parameter.
pub fn numeric_gradients(
    model: &InnModel<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    step: f64,
) -> Result<GradientBundle<f64>> {
    let mut probe = model.clone();
    let mut out = GradientBundle::zeros_like(model);
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    for (ti, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let orig = probe.tensors()[ti][i];
            probe.tensors_mut()[ti][i] = orig + step;
            let plus = probe.loss(x, y)?;
            probe.tensors_mut()[ti][i] = orig - step;
            let minus = probe.loss(x, y)?;
            probe.tensors_mut()[ti][i] = orig;
            out.tensors_mut()[ti][i] = (plus - minus) / (2.0 * step);
        }
    }
    Ok(out)
}

/// Max over parameters of `|a - n| / max(|a|, |n|)`, ignoring pairs whose
/// absolute difference is below a small noise floor.
pub fn compare_gradients(
    analytic: &GradientBundle<f64>,
    numeric: &GradientBundle<f64>,
    tolerance: f64,
) -> GradCheckReport {
    let a = analytic.flatten();
    let n = numeric.flatten();
    assert_eq!(a.len(), n.len(), "gradient bundles differ in shape");
    let mut worst = (0.0, 0);
    let mut max_abs = 0.0f64;
    for (i, (ga, gn)) in a.iter().zip(&n).enumerate() {
        let diff = (ga - gn).abs();
        max_abs = max_abs.max(diff);
        let rel = if diff < ABS_FLOOR {
            0.0
        } else {
            diff / ga.abs().max(gn.abs())
        };
        if rel > worst.0 || rel.is_nan() {
            worst = (rel, i);
        }
    }
    GradCheckReport {
        n_params: a.len(),
        max_rel_err: worst.0,
        max_abs_err: max_abs,
        worst_index: worst.1,
        tolerance,
        passed: worst.0 <= tolerance,
    }
}

/// Check every analytic gradient of `model` against central differences
/// (step `1e-5`) on a seeded random batch of `rows` inputs and targets.
pub fn grad_check(model: &InnModel<f64>, rows: usize, seed: u64, tolerance: f64) -> Result<GradCheckReport> {
    let mut rng = rng::stream(seed, Stream::Data);
    let mut draw = |_: usize, _: usize| -> f64 { StandardNormal.sample(&mut rng) };
    let x = DMatrix::from_fn(rows, model.dim, &mut draw);
    let y = DMatrix::from_fn(rows, model.dim, &mut draw);
    let (_, analytic) = model.loss_and_gradients(&x, &y)?;
    let numeric = numeric_gradients(model, &x, &y, 1e-5)?;
    Ok(compare_gradients(&analytic, &numeric, tolerance))
}
