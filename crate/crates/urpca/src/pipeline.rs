//! Directory-level workflows shared by the command-line tool and tests.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use urpca_core::metrics::MetricsReport;
use urpca_core::rpca::{BlockVariant, ModelConfig, UnfoldedModel};
use urpca_core::spectrum::Window;
use urpca_core::train::TrainConfig;

use crate::checkpoint::{self, CheckpointMeta};
use crate::dataset::{load_split, DatasetManifest, Split};
use crate::error::Result;
use crate::evaluate::{evaluate, Method};
use crate::training::{examples, train, EpochRecord, TrainOutcome};

/// Default transform window. Methods are only comparable under the same one.
pub const WINDOW: Window = Window::Rectangular;

pub fn init_model(variant: BlockVariant, layers: usize, n_fft: usize, seed: u64) -> Result<UnfoldedModel<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(UnfoldedModel::init(ModelConfig::new(variant, layers, n_fft), &mut rng)?)
}

/// Trains a fresh model on the `train` split of `dir`, selecting on `val`.
pub fn train_on_dir(
    dir: &Path,
    variant: BlockVariant,
    layers: usize,
    config: TrainConfig,
    window: Window,
    threads: usize,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let manifest = DatasetManifest::load(dir)?;
    let train_set = examples(&load_split(dir, Split::Train)?, window, threads)?;
    let val_set = examples(&load_split(dir, Split::Val)?, window, threads)?;
    let model = init_model(variant, layers, manifest.radar.n_samples, config.seed)?;
    train(model, &train_set, &val_set, config, threads, on_epoch)
}

/// Trains and writes the best checkpoint to `out`.
pub fn train_to_file(
    dir: &Path,
    out: &Path,
    variant: BlockVariant,
    layers: usize,
    config: TrainConfig,
    window: Window,
    threads: usize,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let outcome = train_on_dir(dir, variant, layers, config, window, threads, on_epoch)?;
    checkpoint::save(out, &outcome.best, CheckpointMeta { seed: config.seed })?;
    Ok(outcome)
}

pub fn evaluate_on_dir(
    dir: &Path,
    method: &Method,
    split: Split,
    window: Window,
    threads: usize,
) -> Result<MetricsReport> {
    let pairs = load_split(dir, split)?;
    evaluate(method, &pairs, split.name(), window, threads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthPoint {
    pub layers: usize,
    pub phase_mae_deg: f64,
    pub amp_mae_db: f64,
    pub auc: f64,
    pub best_epoch: usize,
}

/// One model per depth under the same training budget, scored on `split`.
pub fn sweep_depth(
    dir: &Path,
    variant: BlockVariant,
    depths: &[usize],
    config: TrainConfig,
    split: Split,
    window: Window,
    threads: usize,
    mut on_epoch: impl FnMut(usize, &EpochRecord),
) -> Result<Vec<DepthPoint>> {
    let manifest = DatasetManifest::load(dir)?;
    let train_set = examples(&load_split(dir, Split::Train)?, window, threads)?;
    let val_set = examples(&load_split(dir, Split::Val)?, window, threads)?;
    let eval_pairs = load_split(dir, split)?;
    let mut out = Vec::with_capacity(depths.len());
    for &layers in depths {
        let model = init_model(variant, layers, manifest.radar.n_samples, config.seed)?;
        let outcome = train(model, &train_set, &val_set, config, threads, |r| on_epoch(layers, r))?;
        let method = Method::Model { name: format!("{variant}-k{layers}"), model: outcome.best };
        let report = evaluate(&method, &eval_pairs, split.name(), window, threads)?;
        out.push(DepthPoint {
            layers,
            phase_mae_deg: report.phase_mae_deg,
            amp_mae_db: report.amp_mae_db,
            auc: report.auc,
            best_epoch: outcome.best_epoch,
        });
    }
    Ok(out)
}
