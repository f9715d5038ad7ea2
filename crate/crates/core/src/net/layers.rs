//! Tensor primitives with hand-written backward passes.
//!
//! Tensors are single samples in channel-major `C x H x W` layout.

use super::scalar::{matmul, MatRef, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor {
            c,
            h,
            w,
            data: vec![T::zero(); c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor data does not match its shape");
        Tensor { c, h, w, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }
}

/// Geometry of a square convolution with "same" zero padding and stride 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
}

impl ConvShape {
    pub fn pad(&self) -> usize {
        self.k / 2
    }

    /// Columns of the weight matrix.
    pub fn patch(&self) -> usize {
        self.cin * self.k * self.k
    }

    pub fn weight_len(&self) -> usize {
        self.cout * self.patch()
    }
}

/// Unfolds `input` into a `(cin*k*k) x (h*w)` column matrix.
fn im2col<T: Scalar>(input: &Tensor<T>, k: usize, col: &mut Vec<T>) {
    let (h, w) = (input.h, input.w);
    let hw = h * w;
    let pad = k / 2;
    col.clear();
    col.resize(input.c * k * k * hw, T::zero());
    for ci in 0..input.c {
        let src = input.channel(ci);
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * hw..(row + 1) * hw];
                let x_lo = pad.saturating_sub(kx);
                let x_hi = (w + pad).saturating_sub(kx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let yy = y + ky;
                    if yy < pad || yy - pad >= h {
                        continue;
                    }
                    let sy = yy - pad;
                    let s0 = sy * w + x_lo + kx - pad;
                    dst[y * w + x_lo..y * w + x_hi].copy_from_slice(&src[s0..s0 + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Adds a column matrix back onto an input-shaped gradient.
fn col2im<T: Scalar>(col: &[T], k: usize, grad: &mut Tensor<T>) {
    let (h, w) = (grad.h, grad.w);
    let hw = h * w;
    let pad = k / 2;
    for ci in 0..grad.c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * hw..(row + 1) * hw];
                let x_lo = pad.saturating_sub(kx);
                let x_hi = (w + pad).saturating_sub(kx).min(w);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let yy = y + ky;
                    if yy < pad || yy - pad >= h {
                        continue;
                    }
                    let sy = yy - pad;
                    let d0 = ci * hw + sy * w + x_lo + kx - pad;
                    let dst = &mut grad.data[d0..d0 + (x_hi - x_lo)];
                    for (d, s) in dst.iter_mut().zip(&src[y * w + x_lo..y * w + x_hi]) {
                        *d = *d + *s;
                    }
                }
            }
        }
    }
}

/// Reusable im2col buffer.
#[derive(Debug, Default)]
pub struct Workspace<T> {
    col: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new() -> Self {
        Workspace { col: Vec::new() }
    }
}

/// Convolution forward pass: `weight` is `cout x cin x k x k`, `bias` is `cout`.
pub fn conv_forward<T: Scalar>(
    shape: ConvShape,
    weight: &[T],
    bias: &[T],
    input: &Tensor<T>,
    ws: &mut Workspace<T>,
) -> Tensor<T> {
    assert_eq!(input.c, shape.cin, "conv input channels");
    let hw = input.plane();
    let mut out = Tensor::zeros(shape.cout, input.h, input.w);
    for (o, &b) in bias.iter().enumerate() {
        out.data[o * hw..(o + 1) * hw].fill(b);
    }
    let wmat = MatRef::new(weight, shape.cout, shape.patch());
    if shape.k == 1 {
        matmul(wmat, MatRef::new(&input.data, shape.cin, hw), &mut out.data, true);
    } else {
        im2col(input, shape.k, &mut ws.col);
        matmul(wmat, MatRef::new(&ws.col, shape.patch(), hw), &mut out.data, true);
    }
    out
}

/// Convolution backward pass. Accumulates into `d_weight` and `d_bias`, and
/// returns the input gradient when `want_input` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Scalar>(
    shape: ConvShape,
    weight: &[T],
    input: &Tensor<T>,
    d_out: &Tensor<T>,
    d_weight: &mut [T],
    d_bias: &mut [T],
    want_input: bool,
    ws: &mut Workspace<T>,
) -> Option<Tensor<T>> {
    let hw = input.plane();
    for (o, db) in d_bias.iter_mut().enumerate() {
        let s = d_out.data[o * hw..(o + 1) * hw]
            .iter()
            .fold(T::zero(), |acc, &v| acc + v);
        *db = *db + s;
    }
    let dmat = MatRef::new(&d_out.data, shape.cout, hw);
    let k = shape.patch();
    if shape.k == 1 {
        matmul(dmat, MatRef::t(&input.data, k, hw), d_weight, true);
        if !want_input {
            return None;
        }
        let mut d_in = Tensor::zeros(input.c, input.h, input.w);
        matmul(MatRef::t(weight, shape.cout, k), dmat, &mut d_in.data, false);
        return Some(d_in);
    }
    im2col(input, shape.k, &mut ws.col);
    matmul(dmat, MatRef::t(&ws.col, k, hw), d_weight, true);
    if !want_input {
        return None;
    }
    // Reuse the column buffer for the column-space gradient.
    matmul(MatRef::t(weight, shape.cout, k), dmat, &mut ws.col, false);
    let mut d_in = Tensor::zeros(input.c, input.h, input.w);
    col2im(&ws.col, shape.k, &mut d_in);
    Some(d_in)
}

pub fn relu_inplace<T: Scalar>(t: &mut Tensor<T>) {
    for v in &mut t.data {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes gradient entries where the ReLU output was not positive.
pub fn relu_backward_inplace<T: Scalar>(output: &Tensor<T>, grad: &mut Tensor<T>) {
    for (g, &o) in grad.data.iter_mut().zip(&output.data) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// 2x2 max pooling, stride 2, floor on odd sizes. Returns the flat input
/// index of each maximum (first maximum on ties).
pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
    let (oh, ow) = (input.h / 2, input.w / 2);
    let mut out = Tensor::zeros(input.c, oh, ow);
    let mut arg = vec![0u32; input.c * oh * ow];
    for c in 0..input.c {
        let base = c * input.h * input.w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = base + 2 * y * input.w + 2 * x;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * y + dy) * input.w + 2 * x + dx;
                    if input.data[i] > input.data[best] {
                        best = i;
                    }
                }
                let o = (c * oh + y) * ow + x;
                out.data[o] = input.data[best];
                arg[o] = best as u32;
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward<T: Scalar>(
    d_out: &Tensor<T>,
    argmax: &[u32],
    input_shape: (usize, usize, usize),
) -> Tensor<T> {
    let mut d_in = Tensor::zeros(input_shape.0, input_shape.1, input_shape.2);
    for (g, &i) in d_out.data.iter().zip(argmax) {
        d_in.data[i as usize] = d_in.data[i as usize] + *g;
    }
    d_in
}

/// Source index of nearest-neighbour resampling from `n_in` to `n_out`.
#[inline]
fn nearest(i: usize, n_in: usize, n_out: usize) -> usize {
    (i * n_in / n_out).min(n_in - 1)
}

/// Nearest-neighbour upsampling to exactly `h x w`.
pub fn upsample_forward<T: Scalar>(input: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let mut out = Tensor::zeros(input.c, h, w);
    for c in 0..input.c {
        let src = input.channel(c);
        for y in 0..h {
            let sy = nearest(y, input.h, h);
            for x in 0..w {
                out.data[(c * h + y) * w + x] = src[sy * input.w + nearest(x, input.w, w)];
            }
        }
    }
    out
}

pub fn upsample_backward<T: Scalar>(d_out: &Tensor<T>, in_h: usize, in_w: usize) -> Tensor<T> {
    let mut d_in = Tensor::zeros(d_out.c, in_h, in_w);
    let (h, w) = (d_out.h, d_out.w);
    for c in 0..d_out.c {
        for y in 0..h {
            let sy = nearest(y, in_h, h);
            for x in 0..w {
                let i = (c * in_h + sy) * in_w + nearest(x, in_w, w);
                d_in.data[i] = d_in.data[i] + d_out.data[(c * h + y) * w + x];
            }
        }
    }
    d_in
}

/// Channel concatenation `[a; b]`.
pub fn concat<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    assert_eq!((a.h, a.w), (b.h, b.w), "concat spatial sizes");
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Tensor::from_vec(a.c + b.c, a.h, a.w, data)
}

/// Splits a concatenated gradient back into `(d_a, d_b)`.
pub fn split<T: Scalar>(grad: Tensor<T>, a_channels: usize) -> (Tensor<T>, Tensor<T>) {
    let at = a_channels * grad.plane();
    let (h, w, c) = (grad.h, grad.w, grad.c);
    let mut data = grad.data;
    let b = data.split_off(at);
    (
        Tensor::from_vec(a_channels, h, w, data),
        Tensor::from_vec(c - a_channels, h, w, b),
    )
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
