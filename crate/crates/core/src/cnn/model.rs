use rayon::prelude::*;

use super::layers::{softmax_rows, Aux, Conv2d, Dense, Layer, Shape};
use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::seed;
use crate::tfa::RgbImage;

/// Samples processed together per work unit. Gradients of the units are
/// summed in unit order, so results do not depend on the thread count.
pub const CHUNK: usize = 8;

/// Image shape as seen by the classifier (`height × width × channels`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl InputShape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn tensor(&self) -> Shape {
        Shape::new(self.channels, self.height, self.width)
    }
}

/// Per-class probabilities produced by the softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    probs: Vec<f64>,
}

impl DecisionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::data("decision vector needs at least two classes"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::data("decision vector has negative or non-finite entries"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::data(format!("decision vector sums to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability (lowest index on exact ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Whether dropout is active. Training mode carries the seed that drives
/// the dropout masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

/// Gradients of every trainable tensor, in [`CnnModel::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    fn zeros_like(model: &CnnModel<T>) -> Self {
        Self {
            tensors: model.params().iter().map(|p| vec![T::ZERO; p.len()]).collect(),
        }
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x += y);
        }
    }

    fn scale(&mut self, factor: T) {
        self.tensors.iter_mut().flatten().for_each(|g| *g *= factor);
    }
}

/// A feed-forward stack of layers ending in a `K`-way softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T: Scalar = f32> {
    input_shape: InputShape,
    num_classes: usize,
    layers: Vec<Layer<T>>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the output.
    shapes: Vec<Shape>,
}

/// Activations of one forward pass, kept for backpropagation.
struct Trace<T> {
    acts: Vec<Vec<T>>,
    aux: Vec<Aux<T>>,
}

impl<T: Scalar> CnnModel<T> {
    /// Default architecture: three conv(3×3)/ReLU/maxpool(2) blocks with 16,
    /// 32 and 64 filters, then dense 128, ReLU, dropout 0.5, dense `K`,
    /// softmax. He-normal weights, zero biases.
    pub fn build(input_shape: InputShape, num_classes: usize, seed_value: u64) -> Result<Self> {
        Self::build_with_dropout(input_shape, num_classes, seed_value, 0.5)
    }

    pub fn build_with_dropout(input_shape: InputShape, num_classes: usize, seed_value: u64, dropout: f32) -> Result<Self> {
        if input_shape.height < 32 || input_shape.width < 32 {
            return Err(Error::config(format!(
                "input must be at least 32x32, got {}x{}",
                input_shape.height, input_shape.width
            )));
        }
        if num_classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        let mut rng = seed::rng(seed_value);
        let mut layers = Vec::new();
        let mut channels = input_shape.channels;
        let (mut h, mut w) = (input_shape.height, input_shape.width);
        for filters in [16, 32, 64] {
            layers.push(Layer::Conv2d(Conv2d::he(channels, filters, 3, &mut rng)));
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2d { size: 2 });
            channels = filters;
            h /= 2;
            w /= 2;
        }
        layers.push(Layer::Flatten);
        layers.push(Layer::Dense(Dense::he(channels * h * w, 128, &mut rng)));
        layers.push(Layer::Relu);
        layers.push(Layer::Dropout { rate: dropout });
        layers.push(Layer::Dense(Dense::he(128, num_classes, &mut rng)));
        layers.push(Layer::Softmax);
        Self::from_layers(input_shape, num_classes, layers)
    }

    /// Validates the shape chain of an arbitrary layer stack. The last layer
    /// must be a softmax over `num_classes` outputs.
    pub fn from_layers(input_shape: InputShape, num_classes: usize, layers: Vec<Layer<T>>) -> Result<Self> {
        if input_shape.height == 0 || input_shape.width == 0 || input_shape.channels == 0 {
            return Err(Error::config("input shape must be nonempty"));
        }
        if !matches!(layers.last(), Some(Layer::Softmax)) {
            return Err(Error::config("network must end with a softmax layer"));
        }
        let mut shapes = vec![input_shape.tensor()];
        for layer in &layers {
            let next = layer.output_shape(*shapes.last().unwrap())?;
            shapes.push(next);
        }
        let out = *shapes.last().unwrap();
        if out != Shape::flat(num_classes) {
            return Err(Error::config(format!(
                "network produces {out:?}, expected {num_classes} class scores"
            )));
        }
        Ok(Self {
            input_shape,
            num_classes,
            layers,
            shapes,
        })
    }

    pub fn input_shape(&self) -> InputShape {
        self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Mutable access to the layers; shapes must stay as they are.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn params(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Converts every weight to another precision.
    pub fn cast<U: Scalar>(&self) -> CnnModel<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64())).collect();
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv2d(c) => Layer::Conv2d(Conv2d {
                    in_channels: c.in_channels,
                    out_channels: c.out_channels,
                    kernel: c.kernel,
                    pad: c.pad,
                    weight: conv(&c.weight),
                    bias: conv(&c.bias),
                }),
                Layer::Dense(d) => Layer::Dense(Dense {
                    inputs: d.inputs,
                    outputs: d.outputs,
                    weight: conv(&d.weight),
                    bias: conv(&d.bias),
                }),
                Layer::Relu => Layer::Relu,
                Layer::MaxPool2d { size } => Layer::MaxPool2d { size: *size },
                Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
                Layer::Flatten => Layer::Flatten,
                Layer::Softmax => Layer::Softmax,
            })
            .collect();
        CnnModel {
            input_shape: self.input_shape,
            num_classes: self.num_classes,
            layers,
            shapes: self.shapes.clone(),
        }
    }

    /// Converts an `H×W×C` image into the channel-major input tensor.
    pub fn image_to_input(&self, img: &RgbImage) -> Result<Vec<T>> {
        let s = self.input_shape;
        if img.shape() != (s.height, s.width, s.channels) {
            return Err(Error::data(format!(
                "image shape {:?} does not match model input {}x{}x{}",
                img.shape(),
                s.height,
                s.width,
                s.channels
            )));
        }
        Ok(hwc_to_chw(img))
    }

    fn check_inputs(&self, inputs: &[&[T]]) -> Result<()> {
        let len = self.shapes[0].len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != len) {
            return Err(Error::data(format!("input has {} values, model expects {len}", bad.len())));
        }
        Ok(())
    }

    fn run_forward(&self, x: Vec<T>, n: usize, mode: Mode, chunk_index: u64) -> Trace<T> {
        let (train, seed_value) = match mode {
            Mode::Eval => (false, 0),
            Mode::Train { seed } => (true, seed),
        };
        let mut rng = seed::derived_rng(seed_value, &[chunk_index]);
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.layers.len());
        acts.push(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, a) = layer.forward(&acts[i], n, self.shapes[i], self.shapes[i + 1], train, &mut rng);
            acts.push(y);
            aux.push(a);
        }
        Trace { acts, aux }
    }

    /// Class probabilities for a batch of channel-major inputs.
    pub fn predict(&self, inputs: &[&[T]], mode: Mode) -> Result<Vec<Vec<T>>> {
        self.check_inputs(inputs)?;
        let chunks: Vec<Vec<Vec<T>>> = inputs
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let x: Vec<T> = chunk.iter().flat_map(|s| s.iter().copied()).collect();
                let mut trace = self.run_forward(x, chunk.len(), mode, ci as u64);
                let out = trace.acts.pop().unwrap();
                out.chunks(self.num_classes).map(|r| r.to_vec()).collect()
            })
            .collect();
        Ok(chunks.into_iter().flatten().collect())
    }

    /// Inference-mode forward pass on one image.
    pub fn forward(&self, img: &RgbImage) -> Result<DecisionVector> {
        let x = self.image_to_input(img)?;
        self.forward_input(&x)
    }

    pub fn forward_input(&self, x: &[T]) -> Result<DecisionVector> {
        let probs = self.predict(&[x], Mode::Eval)?.remove(0);
        let probs: Vec<f64> = probs.into_iter().map(Scalar::to_f64).collect();
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite class probability".into()));
        }
        DecisionVector::new(probs)
    }

    /// Pre-softmax scores of one input (inference mode).
    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_inputs(&[x])?;
        let mut trace = self.run_forward(x.to_vec(), 1, Mode::Eval, 0);
        trace.acts.pop();
        Ok(trace.acts.pop().unwrap())
    }

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// every trainable tensor.
    pub fn loss_and_grads(&self, inputs: &[&[T]], labels: &[usize], mode: Mode) -> Result<(f64, Gradients<T>)> {
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::data("batch must be nonempty with one label per input"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::data(format!(
                "label {bad} out of range for {} classes",
                self.num_classes
            )));
        }
        self.check_inputs(inputs)?;
        let batch = inputs.len();
        let parts: Vec<(f64, Gradients<T>)> = inputs
            .par_chunks(CHUNK)
            .zip(labels.par_chunks(CHUNK))
            .enumerate()
            .map(|(ci, (xs, ys))| self.chunk_loss_and_grads(xs, ys, mode, ci as u64, batch))
            .collect();
        let mut total = Gradients::zeros_like(self);
        let mut loss = 0.0;
        for (l, g) in &parts {
            loss += l;
            total.add(g);
        }
        if !loss.is_finite() {
            return Err(Error::Numeric("non-finite training loss".into()));
        }
        Ok((loss / batch as f64, total))
    }

    /// Summed loss of a chunk and its gradients already divided by the full
    /// batch size.
    fn chunk_loss_and_grads(&self, xs: &[&[T]], ys: &[usize], mode: Mode, chunk_index: u64, batch: usize) -> (f64, Gradients<T>) {
        let n = xs.len();
        let k = self.num_classes;
        let x: Vec<T> = xs.iter().flat_map(|s| s.iter().copied()).collect();
        let trace = self.run_forward(x, n, mode, chunk_index);
        let probs = trace.acts.last().unwrap();
        let mut loss = 0.0;
        let inv = T::from_f64(1.0 / batch as f64);
        // softmax + cross-entropy: d loss / d logits = (p - onehot) / B
        let mut grad: Vec<T> = probs.to_vec();
        for (s, &label) in ys.iter().enumerate() {
            loss -= probs[s * k + label].to_f64().max(f64::MIN_POSITIVE).ln();
            grad[s * k + label] -= T::ONE;
        }
        grad.iter_mut().for_each(|g| *g *= inv);

        let mut grads = Gradients::zeros_like(self);
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut next = 0;
        for layer in &self.layers {
            offsets.push(next);
            next += layer.params().len();
        }
        let last = self.layers.len() - 1;
        let mut dy = grad;
        for i in (0..last).rev() {
            let layer = &self.layers[i];
            let count = layer.params().len();
            let slot = &mut grads.tensors[offsets[i]..offsets[i] + count];
            let need_dx = i > 0;
            let dx = layer.backward(
                &trace.acts[i],
                &trace.acts[i + 1],
                &trace.aux[i],
                &dy,
                n,
                self.shapes[i],
                self.shapes[i + 1],
                slot,
                need_dx,
            );
            match dx {
                Some(dx) => dy = dx,
                None => break,
            }
        }
        (loss, grads)
    }

    /// Applies `step` to every (parameter, gradient) pair.
    pub(crate) fn apply<F: FnMut(usize, &mut [T], &[T])>(&mut self, grads: &Gradients<T>, mut step: F) {
        for (i, (p, g)) in self.params_mut().into_iter().zip(&grads.tensors).enumerate() {
            step(i, p, g);
        }
    }
}

impl<T: Scalar> Gradients<T> {
    pub fn scaled(mut self, factor: T) -> Self {
        self.scale(factor);
        self
    }
}

pub(crate) fn hwc_to_chw<T: Scalar>(img: &RgbImage) -> Vec<T> {
    let (h, w, c) = img.shape();
    let mut out = vec![T::ZERO; h * w * c];
    for r in 0..h {
        for col in 0..w {
            for ch in 0..c {
                out[(ch * h + r) * w + col] = T::from_f64(img.data[(r * w + col) * c + ch] as f64);
            }
        }
    }
    out
}

/// Probabilities of a logit vector (stable softmax).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    softmax_rows(logits, logits.len())
}
