//! Mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::layers::Tensor;
use super::loss::{loss_and_grad, loss_only, LossWeights};
use super::optim::Adam;
use super::unet::{encode_input, Architecture, Weights};
use super::NetError;
use crate::dataset::{GroundTruthVariant, TrainingSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of samples held out for validation (rounded down).
    pub val_fraction: f64,
    pub alpha_cap: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 10,
            seed: 0,
            val_fraction: 0.1,
            alpha_cap: LossWeights::default().alpha_cap,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err("learning_rate must be positive".into());
        }
        if self.batch_size == 0 {
            return Err("batch_size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err("val_fraction must lie in [0, 1)".into());
        }
        if !(self.alpha_cap.is_finite() && self.alpha_cap >= 1.0) {
            return Err("alpha_cap must be at least 1".into());
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when no samples are held out.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample {index} cannot provide a {variant} observation and ground truth")]
    VariantMismatch { index: usize, variant: GroundTruthVariant },
    #[error("training diverged in epoch {epoch}; weights from before the failing step are retained")]
    Diverged {
        epoch: usize,
        last_good: Box<Weights<f32>>,
        log: Vec<EpochLog>,
    },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: Weights<f32>,
    pub log: Vec<EpochLog>,
}

fn encode_pair(sample: &TrainingSample, variant: GroundTruthVariant) -> Option<(Tensor<f32>, Vec<bool>)> {
    let obs = sample.observation_for(variant.size)?;
    let input = encode_input(&obs).ok()?;
    Some((input, sample.gt(variant).cells.clone()))
}

/// Trains a fresh network for `variant` on `samples`.
pub fn train(
    samples: &[TrainingSample],
    variant: GroundTruthVariant,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, TrainError> {
    let arch = Architecture::full(variant.size);
    let weights = Weights::init(&arch, config.seed);
    train_from(weights, samples, variant, config, &mut progress)
}

/// Continues training `weights` (whose input size must match the variant).
pub fn train_from(
    mut weights: Weights<f32>,
    samples: &[TrainingSample],
    variant: GroundTruthVariant,
    config: &TrainConfig,
    progress: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome, TrainError> {
    config.validate().map_err(TrainError::Config)?;
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if weights.arch.input_size != variant.size {
        return Err(NetError::Fingerprint {
            expected: format!("input size {}", variant.size),
            found: format!("input size {}", weights.arch.input_size),
        }
        .into());
    }
    for (index, s) in samples.iter().enumerate() {
        if s.observation_for(variant.size).is_none() {
            return Err(TrainError::VariantMismatch { index, variant });
        }
    }
    let lw = LossWeights { alpha_cap: config.alpha_cap };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((samples.len() as f64) * config.val_fraction).floor() as usize;
    let n_val = n_val.min(samples.len() - 1);
    let val_idx: Vec<usize> = order[samples.len() - n_val..].to_vec();
    let mut train_idx: Vec<usize> = order[..samples.len() - n_val].to_vec();

    let mut adam = Adam::new(&weights, config.learning_rate);
    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        train_idx.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut seen = 0usize;
        for chunk in train_idx.chunks(config.batch_size) {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&i| encode_pair(&samples[i], variant).expect("checked above"))
                .collect();
            let (loss, grads) = match loss_and_grad(&weights, &batch, &lw) {
                Ok(r) => r,
                Err(NetError::NonFiniteLoss) => {
                    return Err(TrainError::Diverged {
                        epoch,
                        last_good: Box::new(weights),
                        log,
                    })
                }
                Err(e) => return Err(e.into()),
            };
            let before = weights.clone();
            adam.step(&mut weights, &grads);
            if !weights.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    last_good: Box::new(before),
                    log,
                });
            }
            sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let val_loss = if val_idx.is_empty() {
            None
        } else {
            let mut total = 0.0;
            for chunk in val_idx.chunks(config.batch_size) {
                let batch: Vec<_> = chunk
                    .iter()
                    .map(|&i| encode_pair(&samples[i], variant).expect("checked above"))
                    .collect();
                total += loss_only(&weights, &batch, &lw)? * chunk.len() as f64;
            }
            Some(total / val_idx.len() as f64)
        };
        let entry = EpochLog {
            epoch,
            train_loss: sum / seen as f64,
            val_loss,
        };
        progress(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome { weights, log })
}

/// Line-delimited JSON training log.
pub fn log_lines(log: &[EpochLog]) -> String {
    log.iter()
        .map(|e| serde_json::to_string(e).expect("log entry serializes") + "\n")
        .collect()
}
