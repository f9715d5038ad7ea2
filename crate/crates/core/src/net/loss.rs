//! Class-balanced binary cross-entropy.

use super::layers::{sigmoid, Tensor, Workspace};
use super::scalar::Scalar;
use super::unet::{backward, forward_cached, Weights};
use super::NetError;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logarithms.
pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    /// Upper bound on the weight given to occupied pixels.
    pub alpha_cap: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha_cap: 20.0 }
    }
}

impl LossWeights {
    /// Weight of occupied pixels for one ground truth: the free/occupied ratio,
    /// capped at `alpha_cap` and never below 1. All-free targets weigh 1.
    pub fn occupied_weight(&self, gt: &[bool]) -> f64 {
        let occupied = gt.iter().filter(|&&g| g).count();
        if occupied == 0 {
            return 1.0;
        }
        let free = gt.len() - occupied;
        (free as f64 / occupied as f64).min(self.alpha_cap).max(1.0)
    }

    /// Per-pixel weight plane.
    pub fn plane(&self, gt: &[bool]) -> Vec<f64> {
        let alpha = self.occupied_weight(gt);
        gt.iter().map(|&g| if g { alpha } else { 1.0 }).collect()
    }
}

/// Summed weighted BCE of one sample and its gradient with respect to the
/// logits, scaled by `grad_scale`.
pub fn weighted_bce<T: Scalar>(logits: &[T], gt: &[bool], lw: &LossWeights, grad_scale: f64) -> (f64, Vec<T>) {
    assert_eq!(logits.len(), gt.len(), "prediction and target sizes differ");
    let alpha = lw.occupied_weight(gt);
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &g) in logits.iter().zip(gt) {
        let p = sigmoid(z.as_f64());
        let pc = p.clamp(EPS, 1.0 - EPS);
        let (w, target) = if g { (alpha, 1.0) } else { (1.0, 0.0) };
        total += if g { -w * pc.ln() } else { -w * (1.0 - pc).ln() };
        // The clamp is flat outside (EPS, 1 - EPS).
        let d = if p > EPS && p < 1.0 - EPS { w * (p - target) } else { 0.0 };
        grad.push(T::of(d * grad_scale));
    }
    (total, grad)
}

/// Mean weighted BCE over all pixels of all samples, and its gradient for
/// every parameter. Samples are processed in order, so accumulation is deterministic.
pub fn loss_and_grad<T: Scalar>(
    weights: &Weights<T>,
    batch: &[(Tensor<T>, Vec<bool>)],
    lw: &LossWeights,
) -> Result<(f64, Weights<T>), NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let mut grads = Weights::zeros(&weights.arch);
    let mut ws = Workspace::new();
    let pixels = (weights.arch.input_size * weights.arch.input_size) as f64;
    let scale = 1.0 / (pixels * batch.len() as f64);
    let mut total = 0.0;
    for (input, gt) in batch {
        let cache = forward_cached(weights, input, &mut ws)?;
        if gt.len() != cache.logits.data.len() {
            return Err(NetError::Shape(format!(
                "target has {} pixels, prediction {}",
                gt.len(),
                cache.logits.data.len()
            )));
        }
        let (loss, d) = weighted_bce(&cache.logits.data, gt, lw, scale);
        total += loss;
        let d_logits = Tensor::from_vec(1, cache.logits.h, cache.logits.w, d);
        backward(weights, &cache, &d_logits, &mut grads, &mut ws);
    }
    let loss = total * scale;
    if !loss.is_finite() {
        return Err(NetError::NonFiniteLoss);
    }
    Ok((loss, grads))
}

/// Mean weighted BCE without gradients.
pub fn loss_only<T: Scalar>(
    weights: &Weights<T>,
    batch: &[(Tensor<T>, Vec<bool>)],
    lw: &LossWeights,
) -> Result<f64, NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let mut ws = Workspace::new();
    let mut total = 0.0;
    let mut pixels = 0usize;
    for (input, gt) in batch {
        let cache = forward_cached(weights, input, &mut ws)?;
        total += weighted_bce(&cache.logits.data, gt, lw, 0.0).0;
        pixels += gt.len();
    }
    let loss = total / pixels as f64;
    if !loss.is_finite() {
        return Err(NetError::NonFiniteLoss);
    }
    Ok(loss)
}
