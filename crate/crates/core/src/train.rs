//! Loss, Adam with decoupled weight decay, the step learning-rate schedule
//! and single-owner parameter updates.
//!
//! The epoch loop, shuffling, validation and checkpointing are driven from
//! the `urpca` crate; everything here is pure computation.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Scalar, Shape, Tape, Var};
use crate::error::{Error, Result};
use crate::rpca::{TapeForward, UnfoldedModel};
use crate::spectrum::{range_matrix, RangeMatrix, Window};

/// Optimization settings. Defaults follow the published protocol: 100
/// epochs, batches of 20, Adam at `5e-4` with weight decay `1e-6`, learning
/// rate halved every 30 epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub lr_step_epochs: usize,
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub loss_weights: LossWeights,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 20,
            learning_rate: 5e-4,
            weight_decay: 1e-6,
            lr_step_epochs: 30,
            lr_decay: 0.5,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            loss_weights: LossWeights::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr_step_epochs == 0 {
            return Err(Error::InvalidConfig("epochs, batch size and lr step must be positive"));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 || !(self.lr_decay > 0.0) {
            return Err(Error::InvalidConfig("learning rate, decay factor or weight decay out of range"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::InvalidConfig("Adam coefficients out of range"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> StepSchedule {
        StepSchedule { base: self.learning_rate, step_epochs: self.lr_step_epochs, decay: self.lr_decay }
    }
}

/// Learning rate multiplied by `decay` every `step_epochs` epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub base: f64,
    pub step_epochs: usize,
    pub decay: f64,
}

impl StepSchedule {
    /// Rate used during `epoch` (1-based).
    pub fn rate(&self, epoch: usize) -> f64 {
        let drops = epoch.saturating_sub(1) / self.step_epochs;
        self.base * libm::pow(self.decay, drops as f64)
    }
}

/// Relative weight of the two reconstruction terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub sparse: f64,
    pub low_rank: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { sparse: 1.0, low_rank: 1.0 }
    }
}

/// Adam with decoupled weight decay on the entries selected by `decay_mask`.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    steps: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    decay_mask: Vec<bool>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(len: usize, config: &TrainConfig, decay_mask: Vec<bool>) -> Self {
        assert_eq!(decay_mask.len(), len);
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            steps: 0,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.adam_eps,
            weight_decay: config.weight_decay,
            decay_mask,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.steps += 1;
        let t = self.steps as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, t as f64);
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let step = T::from_f64(lr / bc1);
        let inv_bc2 = T::from_f64(1.0 / bc2);
        let eps = T::from_f64(self.eps);
        let shrink = T::from_f64(1.0 - lr * self.weight_decay);
        for i in 0..params.len() {
            if self.decay_mask[i] {
                params[i] *= shrink;
            }
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + one_b1 * g;
            self.v[i] = b2 * self.v[i] + one_b2 * g * g;
            params[i] -= step * self.m[i] / ((self.v[i] * inv_bc2).sqrt() + eps);
        }
    }
}

/// One sample in network form: the normalized interfered spectrum `D` and
/// the targets `S* = scale * FFT(clean)`, `L* = D - S*`, all channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample<T> {
    pub data: Vec<T>,
    pub sparse: Vec<T>,
    pub low_rank: Vec<T>,
    pub scale: f64,
}

impl<T: Scalar> TrainingExample<T> {
    pub fn from_signals(interfered: &[Complex64], clean: &[Complex64], window: Window) -> Result<Self> {
        let d = range_matrix(interfered, window)?.normalized();
        let s = range_matrix(clean, window)?.scaled_by(d.scale());
        Self::from_matrices(&d, &s)
    }

    /// `data` must already carry its normalization; `sparse` must share it.
    pub fn from_matrices(data: &RangeMatrix, sparse: &RangeMatrix) -> Result<Self> {
        let low_rank = data.sub(sparse)?;
        Ok(Self {
            data: data.to_channels(),
            sparse: sparse.to_channels(),
            low_rank: low_rank.to_channels(),
            scale: data.scale(),
        })
    }

    pub fn n_fft(&self) -> usize {
        self.data.len() / 2
    }
}

/// `w_s mse(S_K, S*) + w_l mse(L_K, L*)`.
pub fn loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    out: &TapeForward,
    sparse_label: Var,
    low_rank_label: Var,
    weights: LossWeights,
) -> Result<Var> {
    let s = tape.mse(out.sparse, sparse_label)?;
    let l = tape.mse(out.low_rank, low_rank_label)?;
    let s = tape.scale(s, T::from_f64(weights.sparse));
    let l = tape.scale(l, T::from_f64(weights.low_rank));
    tape.add(s, l)
}

fn build_loss<T: Scalar>(
    model: &UnfoldedModel<T>,
    example: &TrainingExample<T>,
    weights: LossWeights,
) -> Result<(Tape<T>, TapeForward, Var)> {
    let shape = Shape::matrix(2, example.n_fft());
    let mut tape = Tape::new();
    let d = tape.leaf(example.data.clone(), shape)?;
    let out = model.forward_on_tape(&mut tape, d)?;
    let s = tape.leaf(example.sparse.clone(), shape)?;
    let l = tape.leaf(example.low_rank.clone(), shape)?;
    let loss = loss_on_tape(&mut tape, &out, s, l, weights)?;
    Ok((tape, out, loss))
}

/// Loss without gradients.
pub fn example_loss<T: Scalar>(model: &UnfoldedModel<T>, example: &TrainingExample<T>, weights: LossWeights) -> Result<f64> {
    let (tape, _, loss) = build_loss(model, example, weights)?;
    Ok(tape.scalar_value(loss).as_f64())
}

/// Loss and its gradient with respect to the flat parameter vector.
pub fn example_gradient<T: Scalar>(
    model: &UnfoldedModel<T>,
    example: &TrainingExample<T>,
    weights: LossWeights,
) -> Result<(f64, Vec<T>)> {
    let (tape, out, loss) = build_loss(model, example, weights)?;
    let mut grads = tape.backward(loss)?;
    let mut flat = vec![T::zero(); model.layout().len()];
    for (seg, var) in model.layout().segments().iter().zip(&out.params) {
        if let Some(g) = grads.take(*var) {
            flat[seg.range()].copy_from_slice(&g);
        }
    }
    Ok((tape.scalar_value(loss).as_f64(), flat))
}

/// Owns the model during training and applies batch-mean updates.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    model: UnfoldedModel<T>,
    adam: Adam<T>,
    config: TrainConfig,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: UnfoldedModel<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = Adam::new(model.layout().len(), &config, model.layout().decay_mask());
        Ok(Self { model, adam, config })
    }

    pub fn model(&self) -> &UnfoldedModel<T> {
        &self.model
    }

    pub fn into_model(self) -> UnfoldedModel<T> {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.adam.steps()
    }

    /// Applies the mean of `grad_sum` over `batch_len` samples at the rate of
    /// `epoch`, then clamps the thresholds.
    pub fn apply(&mut self, mut grad_sum: Vec<T>, batch_len: usize, epoch: usize) -> Result<()> {
        let inv = T::from_f64(1.0 / batch_len.max(1) as f64);
        grad_sum.iter_mut().for_each(|g| *g *= inv);
        if grad_sum.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged(self.adam.steps() as usize + 1));
        }
        let lr = self.config.schedule().rate(epoch);
        self.adam.step(self.model.params_mut(), &grad_sum, lr);
        self.model.clamp_lambdas();
        Ok(())
    }

    /// Sequential batch step; returns the batch-mean loss.
    pub fn train_batch(&mut self, batch: &[&TrainingExample<T>], epoch: usize) -> Result<f64> {
        let mut sum = vec![T::zero(); self.model.layout().len()];
        let mut loss = 0.0;
        for ex in batch {
            let (l, g) = example_gradient(&self.model, ex, self.config.loss_weights)?;
            loss += l;
            sum.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        let mean = loss / batch.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged(self.adam.steps() as usize + 1));
        }
        self.apply(sum, batch.len(), epoch)?;
        Ok(mean)
    }
}
