//! U-Net forward and backward passes.
//!
//! Encoder stage `i` applies two 3x3 conv + ReLU layers producing `widths[i]`
//! channels; stages after the first are preceded by 2x2 max pooling (floor).
//! Decoder level `i` upsamples the deeper feature map to the exact size of
//! encoder output `i`, concatenates `[skip, upsampled]` and applies another
//! double conv producing `widths[i - 1]` channels (`widths[0]` at level 0).
//! A 1x1 conv and a logistic sigmoid produce the occupancy probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    concat, conv_backward, conv_forward, maxpool_backward, maxpool_forward, relu_backward_inplace,
    relu_inplace, sigmoid, split, upsample_backward, upsample_forward, ConvShape, Tensor, Workspace,
};
use super::scalar::Scalar;
use super::NetError;
use crate::sensor::LocalSemanticMap;
use crate::world::ClassId;

/// Number of one-hot input channels: free, unknown, wall, chair, table.
pub const INPUT_CHANNELS: usize = 5;
/// Encoder channel plan of the full model.
pub const FULL_WIDTHS: [usize; 5] = [32, 64, 128, 256, 256];

/// Architecture fingerprint: everything that determines tensor shapes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture {
    pub input_size: usize,
    pub in_channels: usize,
    pub widths: Vec<usize>,
}

impl Architecture {
    /// The imagination network for a 60- or 100-cell input.
    pub fn full(input_size: usize) -> Self {
        Architecture {
            input_size,
            in_channels: INPUT_CHANNELS,
            widths: FULL_WIDTHS.to_vec(),
        }
    }

    pub fn levels(&self) -> usize {
        self.widths.len()
    }

    /// Spatial side of each encoder level.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut s = self.input_size;
        (0..self.levels())
            .map(|i| {
                if i > 0 {
                    s /= 2;
                }
                s
            })
            .collect()
    }

    fn decoder_width(&self, level: usize) -> usize {
        if level == 0 {
            self.widths[0]
        } else {
            self.widths[level - 1]
        }
    }

    /// Every conv layer in parameter order: encoder stages, decoder levels from
    /// deepest to shallowest, then the 1x1 head.
    pub fn conv_shapes(&self) -> Vec<ConvShape> {
        let l = self.levels();
        let mut out = Vec::new();
        let mut cin = self.in_channels;
        for &w in &self.widths {
            out.push(ConvShape { cin, cout: w, k: 3 });
            out.push(ConvShape { cin: w, cout: w, k: 3 });
            cin = w;
        }
        let mut deeper = self.widths[l - 1];
        for level in (0..l - 1).rev() {
            let cout = self.decoder_width(level);
            out.push(ConvShape {
                cin: self.widths[level] + deeper,
                cout,
                k: 3,
            });
            out.push(ConvShape { cin: cout, cout, k: 3 });
            deeper = cout;
        }
        out.push(ConvShape { cin: deeper, cout: 1, k: 1 });
        out
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let l = self.levels();
        let mut names = Vec::new();
        for i in 0..l {
            for j in 1..=2 {
                names.push(format!("enc{i}.conv{j}.weight"));
                names.push(format!("enc{i}.conv{j}.bias"));
            }
        }
        for level in (0..l - 1).rev() {
            for j in 1..=2 {
                names.push(format!("dec{level}.conv{j}.weight"));
                names.push(format!("dec{level}.conv{j}.bias"));
            }
        }
        names.push("head.weight".into());
        names.push("head.bias".into());
        names
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.widths.len() < 2 || self.widths.contains(&0) || self.in_channels == 0 {
            return Err(NetError::Architecture("need at least two non-empty levels".into()));
        }
        if self.level_sizes().last().copied().unwrap_or(0) == 0 {
            return Err(NetError::Architecture(format!(
                "input size {} too small for {} levels",
                self.input_size,
                self.levels()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// All trainable tensors of one network, in [`Architecture::parameter_names`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub arch: Architecture,
    pub tensors: Vec<NamedTensor<T>>,
}

impl<T: Scalar> Weights<T> {
    /// All-zero parameters.
    pub fn zeros(arch: &Architecture) -> Self {
        let shapes = arch.conv_shapes();
        let names = arch.parameter_names();
        let mut tensors = Vec::with_capacity(names.len());
        for (i, s) in shapes.iter().enumerate() {
            tensors.push(NamedTensor {
                name: names[2 * i].clone(),
                shape: vec![s.cout, s.cin, s.k, s.k],
                data: vec![T::zero(); s.weight_len()],
            });
            tensors.push(NamedTensor {
                name: names[2 * i + 1].clone(),
                shape: vec![s.cout],
                data: vec![T::zero(); s.cout],
            });
        }
        Weights {
            arch: arch.clone(),
            tensors,
        }
    }

    /// He-uniform initialisation (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut w = Weights::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, s) in arch.conv_shapes().iter().enumerate() {
            let bound = (6.0 / s.patch() as f64).sqrt();
            for v in &mut w.tensors[2 * i].data {
                *v = T::of(rng.random_range(-bound..bound));
            }
        }
        w
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Checks that tensor names and shapes agree with the fingerprint.
    pub fn check_shapes(&self) -> Result<(), NetError> {
        let reference = Weights::<T>::zeros(&self.arch);
        if reference.tensors.len() != self.tensors.len() {
            return Err(NetError::Architecture("tensor count does not match architecture".into()));
        }
        for (a, b) in self.tensors.iter().zip(&reference.tensors) {
            if a.name != b.name || a.shape != b.shape || a.data.len() != b.data.len() {
                return Err(NetError::Architecture(format!("tensor `{}` has the wrong shape", a.name)));
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        Weights {
            arch: self.arch.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| NamedTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::of(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    fn conv(&self, index: usize) -> (&[T], &[T]) {
        (&self.tensors[2 * index].data, &self.tensors[2 * index + 1].data)
    }
}

/// One-hot encodes a semantic map into `5 x size x size`.
pub fn encode_input<T: Scalar>(map: &LocalSemanticMap) -> Result<Tensor<T>, NetError> {
    let n = map.size;
    let plane = n * n;
    if map.cells.len() != plane {
        return Err(NetError::Shape(format!("map has {} cells, expected {plane}", map.cells.len())));
    }
    let mut t = Tensor::zeros(INPUT_CHANNELS, n, n);
    for (i, &class) in map.cells.iter().enumerate() {
        t.data[class.as_u8() as usize * plane + i] = T::one();
    }
    Ok(t)
}

/// One-hot encodes raw class bytes, rejecting values outside the enum.
pub fn encode_bytes<T: Scalar>(size: usize, cells: &[u8]) -> Result<Tensor<T>, NetError> {
    let classes = cells
        .iter()
        .map(|&b| ClassId::from_u8(b).ok_or(NetError::InvalidClass(b)))
        .collect::<Result<Vec<_>, _>>()?;
    encode_input(&LocalSemanticMap { size, cells: classes })
}

/// Encoder outputs `x1 .. xL`.
#[derive(Debug, Clone)]
pub struct FeaturePyramid<T> {
    pub levels: Vec<Tensor<T>>,
}

impl<T: Scalar> FeaturePyramid<T> {
    pub fn shapes(&self) -> Vec<(usize, usize, usize)> {
        self.levels.iter().map(|t| t.shape()).collect()
    }
}

#[derive(Debug, Clone)]
struct BlockCache<T> {
    input: Tensor<T>,
    mid: Tensor<T>,
    out: Tensor<T>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    encoder: Vec<BlockCache<T>>,
    pool_args: Vec<Vec<u32>>,
    decoder: Vec<BlockCache<T>>,
    /// Spatial size of the tensor each decoder level upsampled from.
    up_from: Vec<(usize, usize)>,
    pub logits: Tensor<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Sigmoid of the logits, evaluated in `f64` and kept inside the open unit interval.
    pub fn probabilities(&self) -> Vec<f64> {
        self.logits
            .data
            .iter()
            .map(|&z| sigmoid(z.as_f64()).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
            .collect()
    }

    pub fn pyramid(&self) -> FeaturePyramid<T> {
        FeaturePyramid {
            levels: self.encoder.iter().map(|b| b.out.clone()).collect(),
        }
    }
}

fn block_forward<T: Scalar>(
    weights: &Weights<T>,
    shapes: &[ConvShape],
    first: usize,
    input: Tensor<T>,
    ws: &mut Workspace<T>,
) -> BlockCache<T> {
    let (w1, b1) = weights.conv(first);
    let mut mid = conv_forward(shapes[first], w1, b1, &input, ws);
    relu_inplace(&mut mid);
    let (w2, b2) = weights.conv(first + 1);
    let mut out = conv_forward(shapes[first + 1], w2, b2, &mid, ws);
    relu_inplace(&mut out);
    BlockCache { input, mid, out }
}

#[allow(clippy::too_many_arguments)]
fn block_backward<T: Scalar>(
    weights: &Weights<T>,
    grads: &mut Weights<T>,
    shapes: &[ConvShape],
    first: usize,
    cache: &BlockCache<T>,
    mut d_out: Tensor<T>,
    want_input: bool,
    ws: &mut Workspace<T>,
) -> Option<Tensor<T>> {
    relu_backward_inplace(&cache.out, &mut d_out);
    let mut d_mid = {
        let (dw, db) = conv_grads(grads, first + 1);
        conv_backward(shapes[first + 1], weights.conv(first + 1).0, &cache.mid, &d_out, dw, db, true, ws)
            .expect("input gradient requested")
    };
    relu_backward_inplace(&cache.mid, &mut d_mid);
    let (dw, db) = conv_grads(grads, first);
    conv_backward(shapes[first], weights.conv(first).0, &cache.input, &d_mid, dw, db, want_input, ws)
}

fn conv_grads<T>(grads: &mut Weights<T>, index: usize) -> (&mut [T], &mut [T]) {
    let (w, b) = grads.tensors[2 * index..2 * index + 2].split_at_mut(1);
    (&mut w[0].data, &mut b[0].data)
}

fn check_input<T: Scalar>(arch: &Architecture, input: &Tensor<T>) -> Result<(), NetError> {
    let expected = (arch.in_channels, arch.input_size, arch.input_size);
    if input.shape() != expected {
        return Err(NetError::Shape(format!(
            "input shape {:?} does not match architecture {:?}",
            input.shape(),
            expected
        )));
    }
    Ok(())
}

/// Runs the network, keeping every intermediate needed for backpropagation.
pub fn forward_cached<T: Scalar>(
    weights: &Weights<T>,
    input: &Tensor<T>,
    ws: &mut Workspace<T>,
) -> Result<ForwardCache<T>, NetError> {
    let arch = &weights.arch;
    check_input(arch, input)?;
    let shapes = arch.conv_shapes();
    let l = arch.levels();
    let mut encoder: Vec<BlockCache<T>> = Vec::with_capacity(l);
    let mut pool_args = Vec::with_capacity(l - 1);
    for level in 0..l {
        let x = if level == 0 {
            input.clone()
        } else {
            let (pooled, arg) = maxpool_forward(&encoder[level - 1].out);
            pool_args.push(arg);
            pooled
        };
        encoder.push(block_forward(weights, &shapes, 2 * level, x, ws));
    }
    let mut decoder: Vec<BlockCache<T>> = Vec::with_capacity(l - 1);
    let mut up_from = Vec::with_capacity(l - 1);
    for (k, level) in (0..l - 1).rev().enumerate() {
        let skip = &encoder[level].out;
        let cat = {
            let deeper = if k == 0 { &encoder[l - 1].out } else { &decoder[k - 1].out };
            up_from.push((deeper.h, deeper.w));
            concat(skip, &upsample_forward(deeper, skip.h, skip.w))
        };
        decoder.push(block_forward(weights, &shapes, 2 * l + 2 * k, cat, ws));
    }
    let head = shapes.len() - 1;
    let (hw, hb) = weights.conv(head);
    let logits = conv_forward(shapes[head], hw, hb, &decoder.last().expect("at least one decoder level").out, ws);
    Ok(ForwardCache {
        encoder,
        pool_args,
        decoder,
        up_from,
        logits,
    })
}

/// Probability map and feature pyramid.
pub fn forward<T: Scalar>(
    weights: &Weights<T>,
    input: &Tensor<T>,
) -> Result<(Vec<f64>, FeaturePyramid<T>), NetError> {
    let cache = forward_cached(weights, input, &mut Workspace::new())?;
    Ok((cache.probabilities(), cache.pyramid()))
}

/// Backpropagates `d_logits` through a cached forward pass, accumulating into `grads`.
pub fn backward<T: Scalar>(
    weights: &Weights<T>,
    cache: &ForwardCache<T>,
    d_logits: &Tensor<T>,
    grads: &mut Weights<T>,
    ws: &mut Workspace<T>,
) {
    let arch = &weights.arch;
    let shapes = arch.conv_shapes();
    let l = arch.levels();
    let head = shapes.len() - 1;
    let top = cache.decoder.last().expect("decoder");
    let mut d = {
        let (dw, db) = conv_grads(grads, head);
        conv_backward(shapes[head], weights.conv(head).0, &top.out, d_logits, dw, db, true, ws)
            .expect("input gradient requested")
    };
    // Gradients flowing into each encoder output through skip connections.
    let mut d_enc: Vec<Option<Tensor<T>>> = vec![None; l];
    for k in (0..l - 1).rev() {
        let level = l - 2 - k;
        let d_cat = block_backward(weights, grads, &shapes, 2 * l + 2 * k, &cache.decoder[k], d, true, ws)
            .expect("input gradient requested");
        let (d_skip, d_up) = split(d_cat, arch.widths[level]);
        d_enc[level] = Some(d_skip);
        let (uh, uw) = cache.up_from[k];
        d = upsample_backward(&d_up, uh, uw);
    }
    // `d` now holds the gradient of the deepest encoder output.
    let mut carry = Some(d);
    for level in (0..l).rev() {
        let mut g = carry.take().expect("gradient for encoder level");
        if let Some(skip) = d_enc[level].take() {
            for (a, b) in g.data.iter_mut().zip(&skip.data) {
                *a = *a + *b;
            }
        }
        let want_input = level > 0;
        let d_in = block_backward(weights, grads, &shapes, 2 * level, &cache.encoder[level], g, want_input, ws);
        if level > 0 {
            let prev = cache.encoder[level - 1].out.shape();
            carry = Some(maxpool_backward(&d_in.expect("input gradient"), &cache.pool_args[level - 1], prev));
        }
    }
}
