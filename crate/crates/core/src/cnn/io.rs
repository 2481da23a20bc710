//! `CNN1` model files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "CNN1" | u32 version | u32 height | u32 width | u32 channels
//! u32 num_classes | u32 layer_count | layer*
//! layer := u8 tag, then
//!   1 conv2d   u32 in, u32 out, u32 kernel, u32 pad, f32 weight[out*in*k*k], f32 bias[out]
//!   2 relu
//!   3 maxpool  u32 size
//!   4 dropout  f32 rate
//!   5 flatten
//!   6 dense    u32 in, u32 out, f32 weight[out*in], f32 bias[out]
//!   7 softmax
//! ```

use std::path::Path;

use super::layers::{Conv2d, Dense, Layer};
use super::model::{CnnModel, InputShape};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"CNN1";
pub const MODEL_VERSION: u32 = 1;

const TAG_CONV: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_POOL: u8 = 3;
const TAG_DROPOUT: u8 = 4;
const TAG_FLATTEN: u8 = 5;
const TAG_DENSE: u8 = 6;
const TAG_SOFTMAX: u8 = 7;

pub fn encode_model(model: &CnnModel<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let floats = |out: &mut Vec<u8>, v: &[f32]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let s = model.input_shape();
    for v in [s.height, s.width, s.channels, model.num_classes(), model.layers().len()] {
        u32le(&mut out, v);
    }
    for layer in model.layers() {
        match layer {
            Layer::Conv2d(c) => {
                out.push(TAG_CONV);
                for v in [c.in_channels, c.out_channels, c.kernel, c.pad] {
                    u32le(&mut out, v);
                }
                floats(&mut out, &c.weight);
                floats(&mut out, &c.bias);
            }
            Layer::Relu => out.push(TAG_RELU),
            Layer::MaxPool2d { size } => {
                out.push(TAG_POOL);
                u32le(&mut out, *size);
            }
            Layer::Dropout { rate } => {
                out.push(TAG_DROPOUT);
                floats(&mut out, &[*rate]);
            }
            Layer::Flatten => out.push(TAG_FLATTEN),
            Layer::Dense(d) => {
                out.push(TAG_DENSE);
                u32le(&mut out, d.inputs);
                u32le(&mut out, d.outputs);
                floats(&mut out, &d.weight);
                floats(&mut out, &d.bias);
            }
            Layer::Softmax => out.push(TAG_SOFTMAX),
        }
    }
    out
}

pub fn save_model(model: &CnnModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let len = count.checked_mul(4).ok_or_else(|| self.fail("tensor size overflow"))?;
        let raw = self.take(len, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<CnnModel<f32>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != MODEL_MAGIC {
        r.pos = 0;
        return Err(r.fail("bad magic, expected CNN1"));
    }
    let version = r.u32("version")? as u32;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let input = InputShape::new(r.u32("height")?, r.u32("width")?, r.u32("channels")?);
    let num_classes = r.u32("class count")?;
    let count = r.u32("layer count")?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let at = r.pos;
        let layer = match r.u8("layer tag")? {
            TAG_CONV => {
                let (ic, oc, k, pad) = (r.u32("conv")?, r.u32("conv")?, r.u32("conv")?, r.u32("conv")?);
                let weight = r.f32s(
                    oc.checked_mul(ic).and_then(|v| v.checked_mul(k * k)).ok_or_else(|| r.fail("conv size overflow"))?,
                    "conv weights",
                )?;
                let bias = r.f32s(oc, "conv bias")?;
                Layer::Conv2d(Conv2d {
                    in_channels: ic,
                    out_channels: oc,
                    kernel: k,
                    pad,
                    weight,
                    bias,
                })
            }
            TAG_RELU => Layer::Relu,
            TAG_POOL => Layer::MaxPool2d {
                size: r.u32("pool size")?,
            },
            TAG_DROPOUT => Layer::Dropout {
                rate: r.f32s(1, "dropout rate")?[0],
            },
            TAG_FLATTEN => Layer::Flatten,
            TAG_DENSE => {
                let (ins, outs) = (r.u32("dense")?, r.u32("dense")?);
                let weight = r.f32s(ins.checked_mul(outs).ok_or_else(|| r.fail("dense size overflow"))?, "dense weights")?;
                let bias = r.f32s(outs, "dense bias")?;
                Layer::Dense(Dense {
                    inputs: ins,
                    outputs: outs,
                    weight,
                    bias,
                })
            }
            TAG_SOFTMAX => Layer::Softmax,
            tag => {
                r.pos = at;
                return Err(r.fail(format!("unknown tag {tag} for layer {i}")));
            }
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after last layer"));
    }
    CnnModel::from_layers(input, num_classes, layers).map_err(|e| r.fail(format!("inconsistent network: {e}")))
}
