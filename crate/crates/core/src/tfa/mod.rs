//! Short-time Fourier analysis: framing, windowing, spectral magnitude,
//! min-max normalization and conversion to fixed-size RGB images.
//!
//! The pipeline for a waveform `y` of length `L` is
//!
//! 1. frame `F` holds `y(F·δ + n)·w(n)` for `n ∈ [0, w_s)`, with
//!    `δ = w_s - L_overlap` and `N_F = ⌊(L - L_overlap) / δ⌋` frames;
//! 2. each frame is zero-padded to `N` points and transformed, keeping the
//!    magnitudes of bins `k = 1 ..= N/2 - 1` (DC and Nyquist excluded);
//! 3. the `(N/2 - 1) × N_F` magnitude matrix is normalized to `[0, 1]` with
//!    its global minimum and maximum;
//! 4. values are mapped through the jet colormap and the image is fitted to
//!    the classifier input size.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigsynth::RealSignal;

mod export;
mod image;

pub use export::{read_tfa, write_png, write_tfa, TFA_MAGIC};
pub(crate) use export::write_rgb8_png;
pub use image::{fit_to_input, gray_image, jet, jet_map, FitMode, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Hamming,
    Hanning,
    Blackman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub window_len: usize,
    pub overlap_len: usize,
    pub fft_points: usize,
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 320,
            overlap_len: 315,
            fft_points: 2048,
            window_kind: WindowKind::Hamming,
        }
    }
}

impl StftConfig {
    /// Frame increment `δ = w_s - L_overlap`.
    pub fn step(&self) -> usize {
        self.window_len.saturating_sub(self.overlap_len)
    }

    /// Null-to-null main-lobe width of the analysis window in Hz.
    pub fn main_lobe_hz(&self, sample_rate: f64) -> f64 {
        let lobes = match self.window_kind {
            WindowKind::Hamming | WindowKind::Hanning => 4.0,
            WindowKind::Blackman => 6.0,
        };
        lobes * sample_rate / self.window_len as f64
    }

    /// Number of kept frequency bins, `N/2 - 1`.
    pub fn num_bins(&self) -> usize {
        self.fft_points / 2 - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::config("window length must be >= 2"));
        }
        if self.overlap_len >= self.window_len {
            return Err(Error::config(format!(
                "overlap {} must be smaller than window length {}",
                self.overlap_len, self.window_len
            )));
        }
        if !self.fft_points.is_power_of_two() || self.fft_points < self.window_len || self.fft_points < 4 {
            return Err(Error::config(format!(
                "FFT size {} must be a power of two >= window length {}",
                self.fft_points, self.window_len
            )));
        }
        Ok(())
    }

    /// Frame count for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> Result<usize> {
        self.validate()?;
        if len < self.window_len {
            return Err(Error::data(format!(
                "signal of {len} samples is shorter than the {}-sample window",
                self.window_len
            )));
        }
        Ok((len - self.overlap_len) / self.step())
    }
}

/// Symmetric window of length `len`; the second half mirrors the first
/// bit-exactly.
pub fn make_window(kind: WindowKind, len: usize) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::config(format!("window length must be >= 2, got {len}")));
    }
    let denom = (len - 1) as f64;
    let tau = 2.0 * std::f64::consts::PI;
    let eval = |n: usize| {
        let x = tau * n as f64 / denom;
        match kind {
            WindowKind::Hamming => 0.54 - 0.46 * x.cos(),
            WindowKind::Hanning => 0.5 - 0.5 * x.cos(),
            WindowKind::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
        }
    };
    let mut w = vec![0.0; len];
    for n in 0..len.div_ceil(2) {
        let v = eval(n);
        w[n] = v;
        w[len - 1 - n] = v;
    }
    Ok(w)
}

/// Splits `y` into windowed frames of `w_s` samples spaced `δ` apart.
pub fn frame_signal(y: &RealSignal, cfg: &StftConfig) -> Result<Vec<Vec<f64>>> {
    let count = cfg.num_frames(y.len())?;
    let window = make_window(cfg.window_kind, cfg.window_len)?;
    let step = cfg.step();
    Ok((0..count)
        .map(|f| {
            let start = f * step;
            y.samples[start..start + cfg.window_len]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect())
}

/// Reusable FFT plan for a fixed transform size.
#[derive(Clone)]
pub struct SpectrumPlan {
    fft: Arc<dyn Fft<f64>>,
    size: usize,
}

impl std::fmt::Debug for SpectrumPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumPlan").field("size", &self.size).finish()
    }
}

impl SpectrumPlan {
    pub fn new(size: usize) -> Result<Self> {
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::config(format!("FFT size {size} must be a power of two >= 4")));
        }
        let fft = FftPlanner::new().plan_fft_forward(size);
        Ok(Self { fft, size })
    }

    /// Magnitudes of bins `1 ..= N/2 - 1` of the zero-padded frame, written
    /// into `out` (length `N/2 - 1`). `buf` is scratch of length `N`.
    fn magnitudes_into(&self, frame: &[f64], buf: &mut [Complex<f64>], out: &mut [f64]) -> Result<()> {
        if frame.len() > self.size {
            return Err(Error::data(format!(
                "frame of {} samples exceeds FFT size {}",
                frame.len(),
                self.size
            )));
        }
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (c, &x) in buf.iter_mut().zip(frame) {
            c.re = x;
        }
        self.fft.process(buf);
        for (o, c) in out.iter_mut().zip(&buf[1..self.size / 2]) {
            *o = c.norm();
        }
        Ok(())
    }

    pub fn magnitudes(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.size];
        let mut out = vec![0.0; self.size / 2 - 1];
        self.magnitudes_into(frame, &mut buf, &mut out)?;
        Ok(out)
    }
}

/// `S(k) = |Σ_n frame(n) e^{-j2πnk/N}|` for `k = 1 ..= N/2 - 1`.
pub fn frame_spectrum(frame: &[f64], fft_points: usize) -> Result<Vec<f64>> {
    SpectrumPlan::new(fft_points)?.magnitudes(frame)
}

/// A frequency × time matrix stored row-major; row `r` is bin `k = r + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub hz_per_bin: f64,
    pub seconds_per_frame: f64,
    /// Set by [`normalize`] when the input was constant.
    pub degenerate: bool,
}

impl SpectrogramMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Frequency in Hz of row `row`.
    pub fn row_frequency_hz(&self, row: usize) -> f64 {
        (row + 1) as f64 * self.hz_per_bin
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Sum of every row.
    pub fn row_energy(&self) -> Vec<f64> {
        self.data.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }
}

/// Un-normalized magnitude matrix `S(k, F)`.
pub fn stft_magnitude(y: &RealSignal, cfg: &StftConfig) -> Result<SpectrogramMatrix> {
    let frames = frame_signal(y, cfg)?;
    let plan = SpectrumPlan::new(cfg.fft_points)?;
    let rows = cfg.num_bins();
    let cols = frames.len();
    let mut data = vec![0.0; rows * cols];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_points];
    let mut column = vec![0.0; rows];
    for (f, frame) in frames.iter().enumerate() {
        plan.magnitudes_into(frame, &mut buf, &mut column)?;
        for (r, &v) in column.iter().enumerate() {
            data[r * cols + f] = v;
        }
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite spectral magnitude".into()));
    }
    Ok(SpectrogramMatrix {
        rows,
        cols,
        data,
        hz_per_bin: y.sample_rate_hz / cfg.fft_points as f64,
        seconds_per_frame: cfg.step() as f64 / y.sample_rate_hz,
        degenerate: false,
    })
}

/// Global min-max normalization to `[0, 1]`. A constant matrix maps to all
/// zeros with `degenerate` set.
pub fn normalize(s: &SpectrogramMatrix) -> SpectrogramMatrix {
    let (lo, hi) = s.min_max();
    let mut out = s.clone();
    if !(hi > lo) {
        log::warn!("constant spectrogram; normalized to zeros");
        out.data.iter_mut().for_each(|v| *v = 0.0);
        out.degenerate = true;
        return out;
    }
    let range = hi - lo;
    out.data.iter_mut().for_each(|v| *v = (*v - lo) / range);
    out.degenerate = false;
    out
}

/// Normalized time-frequency matrix `G` of `y`.
pub fn spectrogram_matrix(y: &RealSignal, cfg: &StftConfig) -> Result<SpectrogramMatrix> {
    Ok(normalize(&stft_magnitude(y, cfg)?))
}

/// Whether the spectrogram is rendered through the jet colormap (3 channels)
/// or kept as a single grayscale channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMode {
    #[default]
    Jet,
    Gray,
}

impl ColorMode {
    pub fn channels(self) -> usize {
        match self {
            ColorMode::Jet => 3,
            ColorMode::Gray => 1,
        }
    }
}

/// Full waveform-to-image settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageConfig {
    pub stft: StftConfig,
    pub target: usize,
    pub fit: FitMode,
    pub color: ColorMode,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            target: 64,
            fit: FitMode::Resize,
            color: ColorMode::Jet,
        }
    }
}

impl ImageConfig {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.target, self.target, self.color.channels())
    }

    pub fn render(&self, y: &RealSignal) -> Result<RgbImage> {
        let g = spectrogram_matrix(y, &self.stft)?;
        let img = match self.color {
            ColorMode::Jet => jet_map(&g)?,
            ColorMode::Gray => gray_image(&g)?,
        };
        fit_to_input(&img, self.target, self.fit)
    }
}

/// Waveform to jet-colored, bilinearly resized `target × target × 3` image.
pub fn spectrogram(y: &RealSignal, cfg: &StftConfig, target: usize) -> Result<RgbImage> {
    ImageConfig {
        stft: *cfg,
        target,
        ..ImageConfig::default()
    }
    .render(y)
}

/// Number of distinct row-energy peaks reaching `threshold × max`.
///
/// Each contiguous above-threshold run contributes its maximum; a peak is
/// dropped when a stronger one lies within `min_separation_hz`, so leakage
/// fringes beside a tone are not counted as bands of their own. Pass
/// [`StftConfig::main_lobe_hz`] for the resolution limit of the analysis.
pub fn dominant_bands(g: &SpectrogramMatrix, threshold: f64, min_separation_hz: f64) -> usize {
    let energy = g.row_energy();
    let max = energy.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    let mut current: Option<(usize, f64)> = None;
    for (i, &e) in energy.iter().enumerate() {
        if e >= threshold * max {
            if current.map_or(true, |(_, v)| e > v) {
                current = Some((i, e));
            }
        } else if let Some(p) = current.take() {
            peaks.push(p);
        }
    }
    peaks.extend(current);
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let min_rows = min_separation_hz / g.hz_per_bin;
    let mut kept: Vec<usize> = Vec::new();
    for (row, _) in peaks {
        if kept.iter().all(|&k| (k.abs_diff(row) as f64) >= min_rows) {
            kept.push(row);
        }
    }
    kept.len()
}
