//! Layer kernels. Every layer works on a chunk of `n` samples stored
//! contiguously, each sample in channel-major (`C×H×W`) order.

use rand::Rng;
use rand_distr::StandardNormal;

use super::scalar::{gemm, Scalar};
use crate::error::{Error, Result};

/// Per-sample tensor shape (`channels × height × width`). Flat vectors use
/// `height = width = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub const fn flat(len: usize) -> Self {
        Self::new(len, 1, 1)
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    const fn plane(&self) -> usize {
        self.height * self.width
    }
}

/// Square `kernel × kernel` convolution, stride 1, zero padding `pad`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub pad: usize,
    /// `out_channels × (in_channels·kernel·kernel)`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    /// He-normal initialized "same" convolution (odd kernel).
    pub fn he<R: Rng + ?Sized>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            pad: kernel / 2,
            weight: he_normal(fan_in, out_channels * fan_in, rng),
            bias: vec![T::ZERO; out_channels],
        }
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.channels != self.in_channels {
            return Err(Error::config(format!(
                "conv expects {} input channels, got {}",
                self.in_channels, input.channels
            )));
        }
        let h = (input.height + 2 * self.pad).checked_sub(self.kernel - 1);
        let w = (input.width + 2 * self.pad).checked_sub(self.kernel - 1);
        match (h, w) {
            (Some(h), Some(w)) if h > 0 && w > 0 => Ok(Shape::new(self.out_channels, h, w)),
            _ => Err(Error::config("convolution kernel larger than its input")),
        }
    }

    /// Unfolds one sample into a `(C·k·k) × (H_out·W_out)` patch matrix.
    fn im2col(&self, x: &[T], input: Shape, output: Shape, cols: &mut [T]) {
        let (k, pad) = (self.kernel, self.pad as isize);
        let (oh, ow) = (output.height, output.width);
        let mut row = 0;
        for c in 0..input.channels {
            let plane = &x[c * input.plane()..(c + 1) * input.plane()];
            for ki in 0..k {
                for kj in 0..k {
                    let dst = &mut cols[row * oh * ow..(row + 1) * oh * ow];
                    let dj = kj as isize - pad;
                    let lo = (-dj).clamp(0, ow as isize) as usize;
                    let hi = (input.width as isize - dj).clamp(lo as isize, ow as isize) as usize;
                    for r in 0..oh {
                        let out_row = &mut dst[r * ow..(r + 1) * ow];
                        let ir = r as isize + ki as isize - pad;
                        if ir < 0 || ir >= input.height as isize {
                            out_row.fill(T::ZERO);
                            continue;
                        }
                        let src = &plane[ir as usize * input.width..(ir as usize + 1) * input.width];
                        out_row[..lo].fill(T::ZERO);
                        let start = (lo as isize + dj) as usize;
                        out_row[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
                        out_row[hi..].fill(T::ZERO);
                    }
                    row += 1;
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`]: accumulates patch gradients into `dx`.
    fn col2im(&self, cols: &[T], input: Shape, output: Shape, dx: &mut [T]) {
        let (k, pad) = (self.kernel, self.pad as isize);
        let (oh, ow) = (output.height, output.width);
        let mut row = 0;
        for c in 0..input.channels {
            let plane = &mut dx[c * input.plane()..(c + 1) * input.plane()];
            for ki in 0..k {
                for kj in 0..k {
                    let src = &cols[row * oh * ow..(row + 1) * oh * ow];
                    let dj = kj as isize - pad;
                    let lo = (-dj).clamp(0, ow as isize) as usize;
                    let hi = (input.width as isize - dj).clamp(lo as isize, ow as isize) as usize;
                    for r in 0..oh {
                        let ir = r as isize + ki as isize - pad;
                        if ir < 0 || ir >= input.height as isize {
                            continue;
                        }
                        let dst = &mut plane[ir as usize * input.width..(ir as usize + 1) * input.width];
                        let start = (lo as isize + dj) as usize;
                        for (d, &g) in dst[start..start + (hi - lo)].iter_mut().zip(&src[r * ow + lo..r * ow + hi]) {
                            *d += g;
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    fn forward(&self, x: &[T], n: usize, input: Shape, output: Shape) -> Vec<T> {
        let (p, hw) = (self.patch_len(), output.plane());
        let mut cols = vec![T::ZERO; p * hw];
        let mut y = vec![T::ZERO; n * output.len()];
        for s in 0..n {
            self.im2col(&x[s * input.len()..(s + 1) * input.len()], input, output, &mut cols);
            let ys = &mut y[s * output.len()..(s + 1) * output.len()];
            for (f, row) in ys.chunks_mut(hw).enumerate() {
                row.fill(self.bias[f]);
            }
            gemm(false, false, self.out_channels, hw, p, T::ONE, &self.weight, &cols, T::ONE, ys);
        }
        y
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        x: &[T],
        dy: &[T],
        n: usize,
        input: Shape,
        output: Shape,
        grads: &mut [Vec<T>],
        need_dx: bool,
    ) -> Option<Vec<T>> {
        let (p, hw) = (self.patch_len(), output.plane());
        let mut cols = vec![T::ZERO; p * hw];
        let mut dcols = vec![T::ZERO; if need_dx { p * hw } else { 0 }];
        let mut dx = need_dx.then(|| vec![T::ZERO; n * input.len()]);
        let (dw, db) = grads.split_at_mut(1);
        for s in 0..n {
            let xs = &x[s * input.len()..(s + 1) * input.len()];
            let dys = &dy[s * output.len()..(s + 1) * output.len()];
            self.im2col(xs, input, output, &mut cols);
            gemm(false, true, self.out_channels, p, hw, T::ONE, dys, &cols, T::ONE, &mut dw[0]);
            for (f, row) in dys.chunks(hw).enumerate() {
                db[0][f] += row.iter().copied().sum::<T>();
            }
            if let Some(dx) = dx.as_mut() {
                gemm(true, false, p, hw, self.out_channels, T::ONE, &self.weight, dys, T::ZERO, &mut dcols);
                self.col2im(&dcols, input, output, &mut dx[s * input.len()..(s + 1) * input.len()]);
            }
        }
        dx
    }
}

/// Fully connected layer `y = W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn he<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            inputs,
            outputs,
            weight: he_normal(inputs, inputs * outputs, rng),
            bias: vec![T::ZERO; outputs],
        }
    }

    fn forward(&self, x: &[T], n: usize) -> Vec<T> {
        let mut y: Vec<T> = (0..n).flat_map(|_| self.bias.iter().copied()).collect();
        gemm(false, true, n, self.outputs, self.inputs, T::ONE, x, &self.weight, T::ONE, &mut y);
        y
    }

    fn backward(&self, x: &[T], dy: &[T], n: usize, grads: &mut [Vec<T>], need_dx: bool) -> Option<Vec<T>> {
        let (dw, db) = grads.split_at_mut(1);
        gemm(true, false, self.outputs, self.inputs, n, T::ONE, dy, x, T::ONE, &mut dw[0]);
        for row in dy.chunks(self.outputs) {
            db[0].iter_mut().zip(row).for_each(|(b, &g)| *b += g);
        }
        need_dx.then(|| {
            let mut dx = vec![T::ZERO; n * self.inputs];
            gemm(false, false, n, self.inputs, self.outputs, T::ONE, dy, &self.weight, T::ZERO, &mut dx);
            dx
        })
    }
}

fn he_normal<T: Scalar, R: Rng + ?Sized>(fan_in: usize, count: usize, rng: &mut R) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..count)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            T::from_f64(std * z)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    Relu,
    /// Non-overlapping `size × size` max pooling (trailing rows/columns dropped).
    MaxPool2d { size: usize },
    /// Inverted dropout: active only in training mode.
    Dropout { rate: f32 },
    Flatten,
    Dense(Dense<T>),
    Softmax,
}

/// Side information recorded in the forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) enum Aux<T> {
    #[default]
    None,
    /// Flat input index of each pooled maximum.
    Argmax(Vec<u32>),
    /// Per-element dropout multiplier (0 or 1/(1-p)).
    Mask(Vec<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "conv2d",
            Layer::Relu => "relu",
            Layer::MaxPool2d { .. } => "maxpool2d",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
            Layer::Dense(_) => "dense",
            Layer::Softmax => "softmax",
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            Layer::Conv2d(c) => c.output_shape(input),
            Layer::Relu | Layer::Softmax => Ok(input),
            Layer::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(input)
            }
            Layer::MaxPool2d { size } => {
                let (h, w) = (input.height / size.max(&1), input.width / size.max(&1));
                if *size == 0 || h == 0 || w == 0 {
                    return Err(Error::config(format!("cannot pool {input:?} by {size}")));
                }
                Ok(Shape::new(input.channels, h, w))
            }
            Layer::Flatten => Ok(Shape::flat(input.len())),
            Layer::Dense(d) => {
                if input.len() != d.inputs {
                    return Err(Error::config(format!(
                        "dense layer expects {} inputs, got {}",
                        d.inputs,
                        input.len()
                    )));
                }
                Ok(Shape::flat(d.outputs))
            }
        }
    }

    /// Trainable tensors in storage order (weight, then bias).
    pub fn params(&self) -> Vec<&[T]> {
        match self {
            Layer::Conv2d(c) => vec![&c.weight, &c.bias],
            Layer::Dense(d) => vec![&d.weight, &d.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        match self {
            Layer::Conv2d(c) => vec![&mut c.weight, &mut c.bias],
            Layer::Dense(d) => vec![&mut d.weight, &mut d.bias],
            _ => Vec::new(),
        }
    }

    /// Forward pass over `n` samples. `rng` drives dropout masks and is only
    /// consulted when `train` is set.
    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        x: &[T],
        n: usize,
        input: Shape,
        output: Shape,
        train: bool,
        rng: &mut R,
    ) -> (Vec<T>, Aux<T>) {
        match self {
            Layer::Conv2d(c) => (c.forward(x, n, input, output), Aux::None),
            Layer::Dense(d) => (d.forward(x, n), Aux::None),
            Layer::Relu => (x.iter().map(|&v| if v > T::ZERO { v } else { T::ZERO }).collect(), Aux::None),
            Layer::Flatten => (x.to_vec(), Aux::None),
            Layer::Softmax => (softmax_rows(x, input.len()), Aux::None),
            Layer::Dropout { rate } => {
                if !train || *rate == 0.0 {
                    return (x.to_vec(), Aux::None);
                }
                let keep = 1.0 - *rate as f64;
                let scale = T::from_f64(1.0 / keep);
                let mask: Vec<T> = x
                    .iter()
                    .map(|_| if rng.gen::<f64>() < keep { scale } else { T::ZERO })
                    .collect();
                let y = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
                (y, Aux::Mask(mask))
            }
            Layer::MaxPool2d { size } => {
                let mut y = Vec::with_capacity(n * output.len());
                let mut arg = Vec::with_capacity(n * output.len());
                for s in 0..n {
                    let xs = &x[s * input.len()..(s + 1) * input.len()];
                    for c in 0..output.channels {
                        for r in 0..output.height {
                            for col in 0..output.width {
                                let mut best = c * input.plane() + r * size * input.width + col * size;
                                for i in 0..*size {
                                    for j in 0..*size {
                                        let idx = c * input.plane() + (r * size + i) * input.width + col * size + j;
                                        if xs[idx] > xs[best] {
                                            best = idx;
                                        }
                                    }
                                }
                                y.push(xs[best]);
                                arg.push(best as u32);
                            }
                        }
                    }
                }
                (y, Aux::Argmax(arg))
            }
        }
    }

    /// Backward pass. `y` is this layer's forward output, `dy` its upstream
    /// gradient; parameter gradients accumulate into `grads` (weight, bias).
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward(
        &self,
        x: &[T],
        y: &[T],
        aux: &Aux<T>,
        dy: &[T],
        n: usize,
        input: Shape,
        output: Shape,
        grads: &mut [Vec<T>],
        need_dx: bool,
    ) -> Option<Vec<T>> {
        match self {
            Layer::Conv2d(c) => c.backward(x, dy, n, input, output, grads, need_dx),
            Layer::Dense(d) => d.backward(x, dy, n, grads, need_dx),
            _ if !need_dx => None,
            Layer::Relu => Some(
                x.iter()
                    .zip(dy)
                    .map(|(&v, &g)| if v > T::ZERO { g } else { T::ZERO })
                    .collect(),
            ),
            Layer::Flatten => Some(dy.to_vec()),
            Layer::Dropout { .. } => Some(match aux {
                Aux::Mask(mask) => dy.iter().zip(mask).map(|(&g, &m)| g * m).collect(),
                _ => dy.to_vec(),
            }),
            Layer::Softmax => {
                let k = input.len();
                let mut dx = vec![T::ZERO; dy.len()];
                for ((dxs, ys), dys) in dx.chunks_mut(k).zip(y.chunks(k)).zip(dy.chunks(k)) {
                    let dot: T = ys.iter().zip(dys).map(|(&p, &g)| p * g).sum();
                    for ((d, &p), &g) in dxs.iter_mut().zip(ys).zip(dys) {
                        *d = p * (g - dot);
                    }
                }
                Some(dx)
            }
            Layer::MaxPool2d { .. } => {
                let mut dx = vec![T::ZERO; n * input.len()];
                if let Aux::Argmax(arg) = aux {
                    for s in 0..n {
                        let base = s * input.len();
                        for o in 0..output.len() {
                            let i = s * output.len() + o;
                            dx[base + arg[i] as usize] += dy[i];
                        }
                    }
                }
                Some(dx)
            }
        }
    }
}

/// Row-wise softmax with max subtraction.
pub(crate) fn softmax_rows<T: Scalar>(x: &[T], k: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(k) {
        let max = row.iter().copied().fold(row[0], |m, v| if v > m { v } else { m });
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        out.extend(exps.into_iter().map(|e| e / total));
    }
    out
}
