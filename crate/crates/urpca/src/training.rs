//! Epoch loop: shuffling, data-parallel batch gradients, validation and
//! best-checkpoint selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use urpca_core::rpca::UnfoldedModel;
use urpca_core::scenario::SamplePair;
use urpca_core::spectrum::Window;
use urpca_core::train::{example_gradient, example_loss, LossWeights, TrainConfig, Trainer, TrainingExample};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;

/// Shuffle stream of the training seed; stream 0 initializes the model.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

impl EpochRecord {
    /// One line of the structured training log.
    pub fn log_line(&self) -> String {
        format!(
            "epoch={} train_loss={:.6e} val_loss={:.6e} lr={:.6e}",
            self.epoch, self.train_loss, self.val_loss, self.lr
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub best: UnfoldedModel<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

pub fn examples(pairs: &[SamplePair], window: Window, threads: usize) -> Result<Vec<TrainingExample<f32>>> {
    map_indexed(pairs.len(), threads, |i| {
        let p = &pairs[i];
        TrainingExample::from_signals(&p.interfered, &p.clean, window)
    })
    .into_iter()
    .map(|r| r.map_err(Error::from))
    .collect()
}

/// Mean loss over `set`. Summation order is fixed, so the value does not
/// depend on `threads`.
pub fn mean_loss(
    model: &UnfoldedModel<f32>,
    set: &[TrainingExample<f32>],
    weights: LossWeights,
    threads: usize,
) -> Result<f64> {
    if set.is_empty() {
        return Ok(f64::NAN);
    }
    let losses = map_indexed(set.len(), threads, |i| example_loss(model, &set[i], weights));
    let mut sum = 0.0;
    for l in losses {
        sum += l?;
    }
    Ok(sum / set.len() as f64)
}

/// Trains for `config.epochs` epochs. Per-example gradients may be computed
/// on several threads but are always summed in batch order, so results are
/// identical for every `threads` value.
pub fn train(
    model: UnfoldedModel<f32>,
    train_set: &[TrainingExample<f32>],
    val_set: &[TrainingExample<f32>],
    config: TrainConfig,
    threads: usize,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut trainer = Trainer::new(model, config)?;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = trainer.model().clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results = map_indexed(batch.len(), threads, |i| {
                example_gradient(trainer.model(), &train_set[batch[i]], config.loss_weights)
            });
            let mut grad = vec![0.0f32; trainer.model().layout().len()];
            let mut batch_loss = 0.0;
            for r in results {
                let (loss, g) = r?;
                batch_loss += loss;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!("non-finite training loss in epoch {epoch}")));
            }
            loss_sum += batch_loss;
            trainer.apply(grad, batch.len(), epoch)?;
        }
        let val_loss = if val_set.is_empty() {
            loss_sum / train_set.len() as f64
        } else {
            mean_loss(trainer.model(), val_set, config.loss_weights, threads)?
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite validation loss in epoch {epoch}")));
        }
        let record =
            EpochRecord { epoch, train_loss: loss_sum / train_set.len() as f64, val_loss, lr: config.schedule().rate(epoch) };
        on_epoch(&record);
        history.push(record);
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best = trainer.model().clone();
        }
    }
    Ok(TrainOutcome { best, best_epoch, history })
}
