use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{GradientBundle, InnModel};
use super::{to_real, Real};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub layers: usize,
    pub width: usize,
    pub s_cap: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: usize,
    /// Share of the training rows held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layers: 6,
            width: 256,
            s_cap: 2.0,
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 20,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.layers > 0
            && self.width > 0
            && self.s_cap > 0.0
            && self.learning_rate > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0;
        if !positive {
            return Err(Error::invalid("training settings must all be positive"));
        }
        if self.patience > self.max_epochs {
            return Err(Error::invalid("patience cannot exceed max_epochs"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Adam with bias-corrected first and second moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T: Real> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(learning_rate: f64, model: &InnModel<T>) -> Self {
        let zeros: Vec<Vec<T>> = model.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        Adam {
            learning_rate: T::of(learning_rate),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step(&mut self, model: &mut InnModel<T>, grads: &GradientBundle<T>) {
        self.step += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.step);
        let bc2 = one - self.beta2.powi(self.step);
        let lr = self.learning_rate;
        for (((p, g), m), v) in model
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub best_val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: InnModel<f32>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl FitOutcome {
    pub fn best_val_loss(&self) -> f64 {
        self.history
            .last()
            .map(|h| h.best_val_loss)
            .unwrap_or(f64::INFINITY)
    }
}

/// Train an identity-initialised INN (single precision) to map rows of `x`
/// onto rows of `y`, minimising the mean squared row distance with Adam.
///
/// A seeded `validation_fraction` of the rows drives early stopping; the
/// returned model is the best one seen on it. Initialisation uses the init
/// stream and the validation carve plus minibatch order the shuffle stream
/// of `cfg.seed`, so the result is a pure function of inputs and config.
pub fn fit_inn(x: &Matrix, y: &Matrix, cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if x.shape() != y.shape() {
        return Err(Error::invalid(format!(
            "INN alignment needs equal shapes, got {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    let (n, dim) = x.shape();
    if dim < 2 {
        return Err(Error::invalid("INN alignment needs at least two dimensions"));
    }
    if n < 2 {
        return Err(Error::invalid("INN alignment needs at least two rows"));
    }

    let mut shuffle = rng::stream(cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut shuffle);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_rows, train_rows) = order.split_at(n_val);
    let xs: DMatrix<f32> = to_real(x);
    let ys: DMatrix<f32> = to_real(y);
    let x_val = xs.select_rows(val_rows);
    let y_val = ys.select_rows(val_rows);
    let mut train_rows = train_rows.to_vec();

    let mut init = rng::stream(cfg.seed, Stream::Init);
    let mut model = InnModel::<f32>::identity_init(dim, cfg.layers, cfg.width, cfg.s_cap, &mut init);
    let mut adam = Adam::new(cfg.learning_rate, &model);

    let mut best = model.clone();
    let mut best_loss = f64::from(model.loss(&x_val, &y_val)?);
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        train_rows.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in train_rows.chunks(cfg.batch_size) {
            let xb = xs.select_rows(batch);
            let yb = ys.select_rows(batch);
            let (loss, grads) = model
                .loss_and_gradients(&xb, &yb)
                .map_err(|_| Error::DivergedAtEpoch(epoch))?;
            if !grads.is_finite() {
                return Err(Error::DivergedAtEpoch(epoch));
            }
            adam.step(&mut model, &grads);
            total += f64::from(loss) * batch.len() as f64;
        }
        let train_loss = total / train_rows.len() as f64;
        let val_loss = f64::from(model.loss(&x_val, &y_val)?);
        if !val_loss.is_finite() || !train_loss.is_finite() {
            return Err(Error::DivergedAtEpoch(epoch));
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            best_val_loss: best_loss,
        });
        log::debug!("epoch {epoch}: train {train_loss:.6e} val {val_loss:.6e}");
        if stale >= cfg.patience {
            break;
        }
    }
    Ok(FitOutcome {
        model: best,
        history,
        best_epoch,
    })
}
