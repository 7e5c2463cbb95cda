use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::layer::{CouplingLayer, Parity};
use super::net::Mlp;
use super::Real;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// A stack of coupling layers with alternating parity, all of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnModel<T: Real> {
    pub dim: usize,
    pub layers: Vec<CouplingLayer<T>>,
}

/// Gradients with exactly the parameter shapes of an [`InnModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle<T: Real> {
    pub layers: Vec<LayerGrad<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T: Real> {
    pub scale: Mlp<T>,
    pub translate: Mlp<T>,
}

impl<T: Real> GradientBundle<T> {
    pub fn zeros_like(model: &InnModel<T>) -> Self {
        GradientBundle {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrad {
                    scale: l.scale_net.zeros_like(),
                    translate: l.translate_net.zeros_like(),
                })
                .collect(),
        }
    }

    /// Tensors in the same order as [`InnModel::tensors`].
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| l.scale.tensors().chain(l.translate.tensors()))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.scale.tensors_mut().chain(l.translate.tensors_mut()))
            .collect()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Architecture and weight scale of a randomly initialised ground-truth INN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomInnSpec {
    pub width: usize,
    pub s_cap: f64,
    /// Uniform bound multiplier for the hidden layers (`gain / sqrt(fan_in)`).
    pub hidden_gain: f64,
    /// Same for the read-out layers; zero would give the identity map.
    pub out_gain: f64,
}

impl Default for RandomInnSpec {
    fn default() -> Self {
        RandomInnSpec {
            width: 64,
            s_cap: 2.0,
            hidden_gain: 0.5,
            out_gain: 0.75,
        }
    }
}

impl<T: Real> InnModel<T> {
    /// Model whose read-out layers are zero, so it starts as the identity.
    /// Hidden layers are uniform within `IDENTITY_HIDDEN_GAIN / sqrt(fan_in)`.
    pub fn identity_init<R: Rng + ?Sized>(dim: usize, layers: usize, width: usize, s_cap: f64, rng: &mut R) -> Self {
        let mut parity = Parity::KeepLow;
        let layers = (0..layers)
            .map(|_| {
                let l = CouplingLayer::identity(dim, parity, width, s_cap, rng);
                parity = parity.flipped();
                l
            })
            .collect();
        InnModel { dim, layers }
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| l.scale_net.tensors().chain(l.translate_net.tensors()))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.scale_net.tensors_mut().chain(l.translate_net.tensors_mut()))
            .collect()
    }

    fn check_batch(&self, x: &DMatrix<T>) -> Result<()> {
        if x.ncols() != self.dim {
            return Err(Error::invalid(format!(
                "INN expects {} columns, got {}",
                self.dim,
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Apply the layers in order to every row of `x`.
    pub fn forward(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_batch(x)?;
        Ok(self.layers.iter().fold(x.clone(), |e, l| l.forward(&e)))
    }

    /// Exact inverse: undo the layers in reverse order.
    pub fn inverse(&self, y: &DMatrix<T>) -> Result<DMatrix<T>> {
        self.check_batch(y)?;
        Ok(self.layers.iter().rev().fold(y.clone(), |e, l| l.inverse(&e)))
    }

    pub fn forward_vec(&self, x: &[T]) -> Result<Vec<T>> {
        let row = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.forward(&row)?.iter().copied().collect())
    }

    pub fn inverse_vec(&self, y: &[T]) -> Result<Vec<T>> {
        let row = DMatrix::from_row_slice(1, y.len(), y);
        Ok(self.inverse(&row)?.iter().copied().collect())
    }

    /// Mean squared row distance `mean_i ||g(x_i) - y_i||^2`.
    pub fn loss(&self, x: &DMatrix<T>, y: &DMatrix<T>) -> Result<T> {
        check_pair(x, y)?;
        let out = self.forward(x)?;
        Ok((out - y).norm_squared() / T::of(x.nrows() as f64))
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: &DMatrix<T>, y: &DMatrix<T>) -> Result<(T, GradientBundle<T>)> {
        check_pair(x, y)?;
        self.check_batch(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut e = x.clone();
        for layer in &self.layers {
            let (next, cache) = layer.forward_cached(&e);
            caches.push(cache);
            e = next;
        }
        let n = T::of(x.nrows() as f64);
        let diff = e - y;
        let loss = diff.norm_squared() / n;
        if !loss.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite loss {}",
                loss.to_f64()
            )));
        }
        let mut delta = diff * (T::of(2.0) / n);
        let mut grads = GradientBundle::zeros_like(self);
        for ((layer, cache), g) in self
            .layers
            .iter()
            .zip(&caches)
            .zip(grads.layers.iter_mut())
            .rev()
        {
            delta = layer.backward(cache, &delta, &mut g.scale, &mut g.translate);
        }
        Ok((loss, grads))
    }

    pub fn cast<U: Real>(&self) -> InnModel<U> {
        InnModel {
            dim: self.dim,
            layers: self.layers.iter().map(|l| l.cast()).collect(),
        }
    }

    /// Per-layer scale exponents and shifts, mostly for inspection.
    pub fn layer_outputs(&self, x: &DVector<T>) -> Vec<(DMatrix<T>, DMatrix<T>)> {
        let mut e = DMatrix::from_row_slice(1, x.len(), x.as_slice());
        let mut out = Vec::new();
        for l in &self.layers {
            let (p, _) = l.halves();
            out.push(l.scale_and_shift(&e.columns(p, l.split).into_owned()));
            e = l.forward(&e);
        }
        out
    }
}

fn check_pair<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::invalid(format!(
            "input batch {:?} and target batch {:?} differ in shape",
            x.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// A smooth, non-linear, exactly invertible map with every weight drawn from
/// the ground-truth stream of `seed`. Used as a known target map.
pub fn random_inn<T: Real>(dim: usize, layers: usize, seed: u64) -> Result<InnModel<T>> {
    random_inn_with(dim, layers, seed, &RandomInnSpec::default())
}

pub fn random_inn_with<T: Real>(dim: usize, layers: usize, seed: u64, spec: &RandomInnSpec) -> Result<InnModel<T>> {
    if dim < 2 || layers == 0 {
        return Err(Error::invalid("random INN needs dim >= 2 and at least one layer"));
    }
    let mut rng = rng::stream(seed, Stream::GroundTruth);
    let mut parity = Parity::KeepLow;
    let layers = (0..layers)
        .map(|_| {
            let l = CouplingLayer::<f64>::random(
                dim,
                parity,
                spec.width,
                spec.s_cap,
                spec.hidden_gain,
                spec.out_gain,
                &mut rng,
            );
            parity = parity.flipped();
            l
        })
        .collect();
    Ok(InnModel::<f64> { dim, layers }.cast())
}
