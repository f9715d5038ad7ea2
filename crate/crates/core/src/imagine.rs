//! Turning raw network output into imagined occupancy: a Gaussian mask built
//! from the scan gates the probabilities, and a threshold binarizes them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::OccupancyPatch;
use crate::net::{self, encode_input, NetError, Weights};
use crate::sensor::LocalSemanticMap;

pub const KERNEL_SIZE: usize = 31;
const HALF: usize = KERNEL_SIZE / 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImagineConfig {
    /// Gaussian standard deviation in cells.
    pub sigma: f64,
    /// Cells whose masked probability is strictly above this are occupied.
    pub theta: f64,
    pub kernel_size: usize,
}

impl Default for ImagineConfig {
    fn default() -> Self {
        ImagineConfig {
            sigma: 5.0,
            theta: 0.2,
            kernel_size: KERNEL_SIZE,
        }
    }
}

#[derive(Debug, Error)]
pub enum ImagineError {
    #[error("invalid imagination config: {0}")]
    Config(String),
    #[error("weights are for {expected}x{expected} maps, got {found}x{found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

impl ImagineConfig {
    pub fn validate(&self) -> Result<(), ImagineError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(ImagineError::Config("sigma must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.theta) {
            return Err(ImagineError::Config("theta must lie in [0, 1)".into()));
        }
        if self.kernel_size != KERNEL_SIZE {
            return Err(ImagineError::Config(format!("kernel_size must be {KERNEL_SIZE}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImaginationResult {
    pub size: usize,
    pub raw: Vec<f64>,
    pub mask: Vec<f64>,
    pub occupancy: OccupancyPatch,
}

/// Unnormalized 2D Gaussian, row-major over offsets -15..=15.
pub fn gauss_kernel_raw(sigma: f64) -> Vec<f64> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let mut k = Vec::with_capacity(KERNEL_SIZE * KERNEL_SIZE);
    for y in -(HALF as i64)..=HALF as i64 {
        for x in -(HALF as i64)..=HALF as i64 {
            k.push(norm * (-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    k
}

/// The Gaussian kernel rescaled to a peak of exactly 1.
pub fn gauss_kernel(sigma: f64) -> Vec<f64> {
    let raw = gauss_kernel_raw(sigma);
    let peak = raw[HALF * KERNEL_SIZE + HALF];
    raw.into_iter().map(|v| v / peak).collect()
}

/// 1D factor of the peak-normalized kernel.
fn gauss_1d(sigma: f64) -> [f64; KERNEL_SIZE] {
    let mut g = [0.0; KERNEL_SIZE];
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - HALF as f64;
        *v = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    g
}

/// Obstacle-class cells as 1, everything else (including unknown) as 0.
pub fn binarize(map: &LocalSemanticMap) -> Vec<f64> {
    map.cells.iter().map(|c| if c.is_obstacle() { 1.0 } else { 0.0 }).collect()
}

/// Zero-padded convolution of the scan hits with the peak-normalized
/// kernel, clipped to `[0, 1]`. Evaluated as two 1D passes.
pub fn make_mask(map: &LocalSemanticMap, config: &ImagineConfig) -> Vec<f64> {
    let n = map.size;
    let hits = binarize(map);
    let g = gauss_1d(config.sigma);
    let h = HALF as i64;
    let mut rows = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut s = 0.0;
            for (k, gk) in g.iter().enumerate() {
                let cc = c as i64 + k as i64 - h;
                if cc >= 0 && (cc as usize) < n {
                    s += gk * hits[r * n + cc as usize];
                }
            }
            rows[r * n + c] = s;
        }
    }
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut s = 0.0;
            for (k, gk) in g.iter().enumerate() {
                let rr = r as i64 + k as i64 - h;
                if rr >= 0 && (rr as usize) < n {
                    s += gk * rows[rr as usize * n + c];
                }
            }
            out[r * n + c] = s.clamp(0.0, 1.0);
        }
    }
    out
}

/// Gates `raw` by `mask` and keeps cells strictly above `theta`.
pub fn combine(size: usize, raw: &[f64], mask: &[f64], theta: f64) -> OccupancyPatch {
    let mut occ = OccupancyPatch::empty(size);
    for (i, (&p, &m)) in raw.iter().zip(mask).enumerate() {
        if p * m > theta {
            occ.cells[i] = true;
        }
    }
    occ
}

/// Imagination from a precomputed raw probability map, e.g. a ground truth.
pub fn imagine_from_raw(map: &LocalSemanticMap, raw: Vec<f64>, config: &ImagineConfig) -> ImaginationResult {
    assert_eq!(raw.len(), map.cells.len(), "raw map size differs from scan map");
    let mask = make_mask(map, config);
    let occupancy = combine(map.size, &raw, &mask, config.theta);
    ImaginationResult {
        size: map.size,
        raw,
        mask,
        occupancy,
    }
}

pub fn imagine(
    weights: &Weights<f32>,
    map: &LocalSemanticMap,
    config: &ImagineConfig,
) -> Result<ImaginationResult, ImagineError> {
    config.validate()?;
    if weights.arch.input_size != map.size {
        return Err(ImagineError::SizeMismatch {
            expected: weights.arch.input_size,
            found: map.size,
        });
    }
    let input = encode_input::<f32>(map)?;
    let (raw, _) = net::forward(weights, &input)?;
    Ok(imagine_from_raw(map, raw, config))
}
