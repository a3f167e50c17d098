//! Mini-batch training loop with class weighting, early stopping, and
//! learning-rate reduction on a stagnant validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::WindowSet;

use super::{AdamConfig, AdamState, ModelSpec, Network};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    /// Stop after this many epochs without validation-loss improvement.
    pub early_stopping_patience: usize,
    /// Multiply the learning rate by this factor...
    pub lr_reduction_factor: f64,
    /// ...after this many stagnant epochs.
    pub lr_patience: usize,
    /// Per-class loss weights (length `num_classes`); `None` weighs all 1.
    pub class_weights: Option<Vec<f32>>,
    /// Apply the class weights to the validation loss as well. Off by
    /// default: weights steer the gradient, not model selection.
    pub weighted_validation: bool,
    /// Stddev of Gaussian noise added to training batches (in standardized
    /// units). Regularizes posteriors so confidence degrades gracefully
    /// near class boundaries; validation and inference stay clean.
    pub augment_noise_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 128,
            learning_rate: 1e-3,
            adam: AdamConfig::default(),
            early_stopping_patience: 5,
            lr_reduction_factor: 0.5,
            lr_patience: 3,
            class_weights: None,
            weighted_validation: false,
            augment_noise_std: 0.2,
            seed: 42,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".to_string()));
        }
        if !(self.lr_reduction_factor > 0.0 && self.lr_reduction_factor < 1.0) {
            return Err(Error::Config("lr reduction factor must be in (0, 1)".to_string()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

fn window_labels_as_classes(set: &WindowSet, num_classes: usize) -> Result<Vec<usize>> {
    set.labels()
        .iter()
        .map(|&l| {
            if l < 0 || l as usize >= num_classes {
                Err(Error::Label(l as i64))
            } else {
                Ok(l as usize)
            }
        })
        .collect()
}

/// Weighted loss and accuracy of a network over a window set, in batches.
pub fn evaluate(
    net: &Network<f32>,
    set: &WindowSet,
    labels: &[usize],
    class_weights: &[f32],
    batch_size: usize,
) -> Result<(f64, f64)> {
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    let idxs: Vec<usize> = (0..set.len()).collect();
    for chunk in idxs.chunks(batch_size) {
        let x = set.gather(chunk);
        let p = net.forward(x.view())?;
        for (row, &i) in chunk.iter().enumerate() {
            let y = labels[i];
            let w = class_weights[y] as f64;
            let py = p[[row, y]] as f64;
            loss_sum += w * -(py.max(f64::MIN_POSITIVE)).ln();
            let mut best = 0usize;
            let mut best_v = f32::NEG_INFINITY;
            for (k, &v) in p.row(row).iter().enumerate() {
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            if best == y {
                correct += 1;
            }
        }
    }
    let n = set.len() as f64;
    Ok((loss_sum / n, correct as f64 / n))
}

/// Trains a fresh network and returns the parameters of the epoch with the
/// best validation loss, plus the per-epoch history.
///
/// Deterministic for a fixed config: initialization and batch shuffling both
/// derive from `cfg.seed`.
pub fn train(
    spec: &ModelSpec,
    train_set: &WindowSet,
    validation_set: &WindowSet,
    cfg: &TrainConfig,
) -> Result<(Network<f32>, TrainingHistory)> {
    cfg.validate()?;
    if train_set.is_empty() || validation_set.is_empty() {
        return Err(Error::Data("training and validation splits must be non-empty".to_string()));
    }
    let train_labels = window_labels_as_classes(train_set, spec.num_classes)?;
    let val_labels = window_labels_as_classes(validation_set, spec.num_classes)?;
    let weights: Vec<f32> = match &cfg.class_weights {
        Some(w) => {
            if w.len() != spec.num_classes {
                return Err(Error::Shape(format!(
                    "{} class weights for {} classes",
                    w.len(),
                    spec.num_classes
                )));
            }
            w.clone()
        }
        None => vec![1.0; spec.num_classes],
    };

    let unit_weights: Vec<f32> = vec![1.0; spec.num_classes];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net: Network<f32> = spec.build_with_rng(&mut rng)?;
    let mut adam = AdamState::new(&net.param_slices().iter().map(|s| s.len()).collect::<Vec<_>>());

    let mut lr = cfg.learning_rate;
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_net = net.clone();
    let mut since_best = 0usize;
    let mut lr_wait = 0usize;
    let mut history = Vec::new();

    let noise = Normal::new(0.0f64, 1.0).expect("unit normal");
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut x = train_set.gather(chunk);
            if cfg.augment_noise_std > 0.0 {
                for v in x.iter_mut() {
                    *v += (noise.sample(&mut rng) * cfg.augment_noise_std) as f32;
                }
            }
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| train_labels[i]).collect();
            let out = net.loss_and_gradients(x.view(), &batch_labels, &weights)?;
            if !out.loss.is_finite() {
                return Err(Error::Diverged { epoch, loss: out.loss });
            }
            loss_sum += out.loss * chunk.len() as f64;
            correct += out.correct;
            net.adam_step(&mut adam, &out.gradients, lr as f32, &cfg.adam)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let train_accuracy = correct as f64 / train_set.len() as f64;

        let val_weights = if cfg.weighted_validation { &weights } else { &unit_weights };
        let (val_loss, val_accuracy) =
            evaluate(&net, validation_set, &val_labels, val_weights, 512)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: val_loss });
        }

        history.push(EpochStats {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
            learning_rate: lr,
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_net = net.clone();
            since_best = 0;
            lr_wait = 0;
        } else {
            since_best += 1;
            lr_wait += 1;
            if lr_wait >= cfg.lr_patience && cfg.lr_patience > 0 {
                lr *= cfg.lr_reduction_factor;
                lr_wait = 0;
            }
            if since_best > cfg.early_stopping_patience {
                break;
            }
        }
    }

    Ok((best_net, TrainingHistory { epochs: history, best_epoch }))
}
