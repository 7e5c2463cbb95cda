use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::net::{Mlp, MlpCache};
use super::Real;

/// Which half of the coordinates a coupling layer passes through unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// The first `k` coordinates pass through.
    KeepLow,
    /// The last `k` coordinates pass through.
    KeepHigh,
}

impl Parity {
    pub fn flipped(self) -> Self {
        match self {
            Parity::KeepLow => Parity::KeepHigh,
            Parity::KeepHigh => Parity::KeepLow,
        }
    }
}

/// Affine coupling: with `a` the pass-through half and `b` the other half,
/// `b' = b * exp(s(a)) + t(a)`, where `s = s_cap * tanh(raw_s / s_cap)` keeps
/// every scale factor inside `[e^-s_cap, e^s_cap]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingLayer<T: Real> {
    pub dim: usize,
    /// Size of the pass-through half, `floor(dim / 2)`.
    pub split: usize,
    pub parity: Parity,
    pub s_cap: T,
    pub scale_net: Mlp<T>,
    pub translate_net: Mlp<T>,
}

pub(crate) struct LayerCache<T: Real> {
    transformed_in: DMatrix<T>,
    squashed: DMatrix<T>,
    exp_s: DMatrix<T>,
    scale: MlpCache<T>,
    translate: MlpCache<T>,
}

/// Hidden-layer gain for trainable identity layers, relative to the
/// `1 / sqrt(fan_in)` uniform bound.
pub const IDENTITY_HIDDEN_GAIN: f64 = 0.1;

impl<T: Real> CouplingLayer<T> {
    /// Layer whose read-out weights are zero, i.e. the identity map.
    pub fn identity<R: Rng + ?Sized>(dim: usize, parity: Parity, width: usize, s_cap: f64, rng: &mut R) -> Self {
        Self::random(dim, parity, width, s_cap, IDENTITY_HIDDEN_GAIN, 0.0, rng)
    }

    pub(crate) fn random<R: Rng + ?Sized>(
        dim: usize,
        parity: Parity,
        width: usize,
        s_cap: f64,
        hidden_gain: f64,
        out_gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(dim >= 2, "coupling layers need at least two coordinates");
        let split = dim / 2;
        let rest = dim - split;
        let net = |rng: &mut R| {
            let mut m = Mlp::zeros(split, width, rest);
            m.layers[0] = super::Dense::uniform(split, width, hidden_gain, rng);
            m.layers[1] = super::Dense::uniform(width, width, hidden_gain, rng);
            m.layers[2] = super::Dense::uniform(width, rest, out_gain, rng);
            m
        };
        let scale_net = net(rng);
        let translate_net = net(rng);
        CouplingLayer {
            dim,
            split,
            parity,
            s_cap: T::of(s_cap),
            scale_net,
            translate_net,
        }
    }

    /// Column offsets of the pass-through and transformed halves.
    pub fn halves(&self) -> (usize, usize) {
        match self.parity {
            Parity::KeepLow => (0, self.split),
            Parity::KeepHigh => (self.dim - self.split, 0),
        }
    }

    fn rest(&self) -> usize {
        self.dim - self.split
    }

    fn squash(&self, raw: &DMatrix<T>) -> DMatrix<T> {
        let cap = self.s_cap;
        raw.map(|r| (r / cap).tanh())
    }

    /// Scale exponent `s(a)` and shift `t(a)` for a batch of pass-through halves.
    pub fn scale_and_shift(&self, pass: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
        let s = self.squash(&self.scale_net.forward(pass)) * self.s_cap;
        (s, self.translate_net.forward(pass))
    }

    pub fn forward(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let (p, q) = self.halves();
        let pass = x.columns(p, self.split).into_owned();
        let (s, t) = self.scale_and_shift(&pass);
        let mut out = x.clone();
        let mut b = out.columns_mut(q, self.rest());
        b.zip_apply(&s, |v, s| *v *= s.exp());
        b += t;
        out
    }

    pub fn inverse(&self, y: &DMatrix<T>) -> DMatrix<T> {
        let (p, q) = self.halves();
        let pass = y.columns(p, self.split).into_owned();
        let (s, t) = self.scale_and_shift(&pass);
        let mut out = y.clone();
        let mut b = out.columns_mut(q, self.rest());
        b -= t;
        b.zip_apply(&s, |v, s| *v *= (-s).exp());
        out
    }

    pub(crate) fn forward_cached(&self, x: &DMatrix<T>) -> (DMatrix<T>, LayerCache<T>) {
        let (p, q) = self.halves();
        let pass = x.columns(p, self.split).into_owned();
        let transformed_in = x.columns(q, self.rest()).into_owned();
        let (raw, scale) = self.scale_net.forward_cached(&pass);
        let (t, translate) = self.translate_net.forward_cached(&pass);
        let squashed = self.squash(&raw);
        let exp_s = squashed.map(|u| (u * self.s_cap).exp());
        let mut out = x.clone();
        let mut b = out.columns_mut(q, self.rest());
        b.copy_from(&transformed_in);
        b.component_mul_assign(&exp_s);
        b += t;
        (
            out,
            LayerCache {
                transformed_in,
                squashed,
                exp_s,
                scale,
                translate,
            },
        )
    }

    /// Backpropagate `d_out`; parameter gradients go into `grad_scale` /
    /// `grad_translate`, the input gradient is returned.
    pub(crate) fn backward(
        &self,
        cache: &LayerCache<T>,
        d_out: &DMatrix<T>,
        grad_scale: &mut Mlp<T>,
        grad_translate: &mut Mlp<T>,
    ) -> DMatrix<T> {
        let (p, q) = self.halves();
        let g = d_out.columns(q, self.rest()).into_owned();

        // d raw_s = g * b * exp(s) * (1 - tanh^2)
        let mut d_raw = g.component_mul(&cache.transformed_in);
        d_raw.component_mul_assign(&cache.exp_s);
        d_raw.zip_apply(&cache.squashed, |d, u| *d *= T::one() - u * u);

        let mut d_in = d_out.clone();
        d_in.columns_mut(q, self.rest()).copy_from(&g.component_mul(&cache.exp_s));
        let da_s = self.scale_net.backward(&cache.scale, &d_raw, grad_scale);
        let da_t = self.translate_net.backward(&cache.translate, &g, grad_translate);
        let mut pass = d_in.columns_mut(p, self.split);
        pass += da_s;
        pass += da_t;
        d_in
    }

    pub(crate) fn cast<U: Real>(&self) -> CouplingLayer<U> {
        CouplingLayer {
            dim: self.dim,
            split: self.split,
            parity: self.parity,
            s_cap: U::of(self.s_cap.to_f64()),
            scale_net: self.scale_net.cast(),
            translate_net: self.translate_net.cast(),
        }
    }
}
