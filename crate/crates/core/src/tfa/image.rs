use serde::{Deserialize, Serialize};

use super::SpectrogramMatrix;
use crate::error::{Error, Result};

/// Row-major `height × width × channels` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::data(format!(
                "image buffer has {} values, expected {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }
}

/// Piecewise-linear jet colormap: dark blue at 0, through cyan, yellow, to
/// dark red at 1.
pub fn jet(v: f64) -> Result<[f64; 3]> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::data(format!("jet input {v} outside [0, 1]")));
    }
    let ramp = |a: f64, b: f64| (4.0 * v + a).min(-4.0 * v + b).clamp(0.0, 1.0);
    Ok([ramp(-1.5, 4.5), ramp(-0.5, 3.5), ramp(0.5, 2.5)])
}

pub fn jet_map(g: &SpectrogramMatrix) -> Result<RgbImage> {
    let mut data = Vec::with_capacity(g.data.len() * 3);
    for &v in &g.data {
        data.extend(jet(v)?.map(|c| c as f32));
    }
    RgbImage::new(g.rows, g.cols, 3, data)
}

/// Single-channel image of `G` without color mapping.
pub fn gray_image(g: &SpectrogramMatrix) -> Result<RgbImage> {
    if let Some(v) = g.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::data(format!("gray input {v} outside [0, 1]")));
    }
    RgbImage::new(g.rows, g.cols, 1, g.data.iter().map(|&v| v as f32).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Bilinear resampling of the whole image; when shrinking, the triangle
    /// kernel is stretched by the scale factor so that every input pixel
    /// contributes.
    #[default]
    Resize,
    /// Center-crop axes longer than the target, zero-pad shorter ones.
    CropPad,
}

/// Fits `img` to a `target × target` image.
pub fn fit_to_input(img: &RgbImage, target: usize, mode: FitMode) -> Result<RgbImage> {
    if target < 8 {
        return Err(Error::config(format!("target size must be >= 8, got {target}")));
    }
    if img.height == 0 || img.width == 0 {
        return Err(Error::data("cannot fit an empty image"));
    }
    if img.height == target && img.width == target {
        return Ok(img.clone());
    }
    Ok(match mode {
        FitMode::Resize => resize(img, target, target),
        FitMode::CropPad => crop_pad(img, target),
    })
}

fn crop_pad(img: &RgbImage, target: usize) -> RgbImage {
    // (source start, destination start, length) for one axis
    let span = |len: usize| {
        if len >= target {
            ((len - target) / 2, 0, target)
        } else {
            (0, (target - len) / 2, len)
        }
    };
    let (sr, dr, nr) = span(img.height);
    let (sc, dc, nc) = span(img.width);
    let ch = img.channels;
    let mut out = RgbImage::zeros(target, target, ch);
    for r in 0..nr {
        let src = ((sr + r) * img.width + sc) * ch;
        let dst = ((dr + r) * target + dc) * ch;
        out.data[dst..dst + nc * ch].copy_from_slice(&img.data[src..src + nc * ch]);
    }
    out
}

/// Normalized resampling weights: for each output index the first input
/// index and the weights that follow it.
fn axis_weights(input: usize, output: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = input as f64 / output as f64;
    let support = scale.max(1.0);
    (0..output)
        .map(|o| {
            let centre = (o as f64 + 0.5) * scale - 0.5;
            let lo = ((centre - support).floor() as isize + 1).max(0) as usize;
            let hi = ((centre + support).ceil() as isize - 1).min(input as isize - 1).max(0) as usize;
            let mut w: Vec<f64> = (lo..=hi)
                .map(|i| (1.0 - ((i as f64 - centre) / support).abs()).max(0.0))
                .collect();
            let sum: f64 = w.iter().sum();
            if sum > 0.0 {
                w.iter_mut().for_each(|x| *x /= sum);
                (lo, w)
            } else {
                // centre outside the input grid: replicate the nearest edge
                let edge = centre.round().clamp(0.0, (input - 1) as f64) as usize;
                (edge, vec![1.0])
            }
        })
        .collect()
}

fn resize(img: &RgbImage, out_h: usize, out_w: usize) -> RgbImage {
    let ch = img.channels;
    let cols = axis_weights(img.width, out_w);
    let rows = axis_weights(img.height, out_h);
    let mut horiz = vec![0.0f64; img.height * out_w * ch];
    for r in 0..img.height {
        let src = &img.data[r * img.width * ch..(r + 1) * img.width * ch];
        for (oc, (start, weights)) in cols.iter().enumerate() {
            let dst = &mut horiz[(r * out_w + oc) * ch..(r * out_w + oc + 1) * ch];
            for (j, &w) in weights.iter().enumerate() {
                let px = &src[(start + j) * ch..(start + j + 1) * ch];
                for (d, &s) in dst.iter_mut().zip(px) {
                    *d += w * s as f64;
                }
            }
        }
    }
    let mut out = RgbImage::zeros(out_h, out_w, ch);
    let stride = out_w * ch;
    for (or, (start, weights)) in rows.iter().enumerate() {
        let mut acc = vec![0.0f64; stride];
        for (j, &w) in weights.iter().enumerate() {
            let row = &horiz[(start + j) * stride..(start + j + 1) * stride];
            acc.iter_mut().zip(row).for_each(|(a, &v)| *a += w * v);
        }
        for (o, a) in out.data[or * stride..(or + 1) * stride].iter_mut().zip(&acc) {
            *o = a.clamp(0.0, 1.0) as f32;
        }
    }
    out
}
