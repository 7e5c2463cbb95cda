use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{matmul, Real};

/// Fully connected layer `out = input * weight + bias` (rows are samples).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T: Real> {
    /// `in x out`
    pub weight: DMatrix<T>,
    pub bias: DVector<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: DMatrix::zeros(inputs, outputs),
            bias: DVector::zeros(outputs),
        }
    }

    /// Weights and biases uniform in `±gain / sqrt(inputs)`.
    pub fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let bound = gain / (inputs as f64).sqrt();
        let mut draw = || T::of(if bound > 0.0 { rng.random_range(-bound..bound) } else { 0.0 });
        let weight = DMatrix::from_fn(inputs, outputs, |_, _| draw());
        let bias = DVector::from_fn(outputs, |_, _| draw());
        Dense { weight, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    fn forward(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut out = matmul(x, false, &self.weight, false);
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.bias[j]);
        }
        out
    }
}

/// Two tanh hidden layers followed by a linear read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T: Real> {
    pub layers: [Dense<T>; 3],
}

/// Activations kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct MlpCache<T: Real> {
    input: DMatrix<T>,
    h1: DMatrix<T>,
    h2: DMatrix<T>,
}

impl<T: Real> Mlp<T> {
    pub fn zeros(inputs: usize, width: usize, outputs: usize) -> Self {
        Mlp {
            layers: [
                Dense::zeros(inputs, width),
                Dense::zeros(width, width),
                Dense::zeros(width, outputs),
            ],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .each_ref()
                .map(|l| Dense::zeros(l.inputs(), l.outputs())),
        }
    }

    pub fn width(&self) -> usize {
        self.layers[0].outputs()
    }

    pub fn forward(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let h1 = self.layers[0].forward(x).map(|v| v.tanh());
        let h2 = self.layers[1].forward(&h1).map(|v| v.tanh());
        self.layers[2].forward(&h2)
    }

    pub(crate) fn forward_cached(&self, x: &DMatrix<T>) -> (DMatrix<T>, MlpCache<T>) {
        let h1 = self.layers[0].forward(x).map(|v| v.tanh());
        let h2 = self.layers[1].forward(&h1).map(|v| v.tanh());
        let out = self.layers[2].forward(&h2);
        (
            out,
            MlpCache {
                input: x.clone(),
                h1,
                h2,
            },
        )
    }

    /// Accumulate parameter gradients into `grad` and return the gradient
    /// with respect to the input.
    pub(crate) fn backward(&self, cache: &MlpCache<T>, d_out: &DMatrix<T>, grad: &mut Mlp<T>) -> DMatrix<T> {
        let inputs = [&cache.input, &cache.h1, &cache.h2];
        let mut delta = d_out.clone();
        for idx in (0..3).rev() {
            if idx < 2 {
                // through tanh: d/dz tanh(z) = 1 - tanh(z)^2
                let act = inputs[idx + 1];
                delta.zip_apply(act, |d, h| *d *= T::one() - h * h);
            }
            let g = &mut grad.layers[idx];
            g.weight += matmul(inputs[idx], true, &delta, false);
            for (j, col) in delta.column_iter().enumerate() {
                g.bias[j] += col.sum();
            }
            delta = matmul(&delta, false, &self.layers[idx].weight, true);
        }
        delta
    }

    pub(crate) fn tensors(&self) -> impl Iterator<Item = &[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub(crate) fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            layers: self.layers.each_ref().map(|l| Dense {
                weight: l.weight.map(|v| U::of(v.to_f64())),
                bias: l.bias.map(|v| U::of(v.to_f64())),
            }),
        }
    }
}
