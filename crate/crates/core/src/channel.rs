//! Flat-fading SISO/MIMO channels with per-branch AWGN.
//!
//! Each receive antenna `i` observes `y_i(n) = Σ_j g_ij · x_j(n - d_ij) + n_i(n)`
//! where `g_ij ∈ [0, 1]` is the path attenuation and `d_ij` the path timing
//! offset rounded to whole samples. The noise variance of every branch is set
//! from that branch's noiseless power and the target SNR.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sigsynth::{ModulationScheme, RealSignal};

/// Smallest singular value accepted for a sampled gain matrix.
pub const RANK_GUARD: f64 = 1e-3;

const MAX_CHANNEL_DRAWS: usize = 10_000;

/// Noise level derived from a measured signal power and a target SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub snr_db: f64,
    pub variance: f64,
}

impl NoiseModel {
    /// `σ² = P / 10^(snr/10)`. An SNR of `+∞` yields zero variance.
    pub fn calibrate(signal_power: f64, snr_db: f64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::config(format!("invalid SNR {snr_db} dB")));
        }
        if !(signal_power > 0.0) || !signal_power.is_finite() {
            return Err(Error::data(format!(
                "signal power {signal_power} is not positive; SNR is undefined"
            )));
        }
        let variance = if snr_db == f64::INFINITY {
            0.0
        } else {
            signal_power / 10f64.powf(snr_db / 10.0)
        };
        Ok(Self { snr_db, variance })
    }
}

/// Adds white Gaussian noise at `snr_db` relative to the measured power of
/// `signal`. `snr_db = +∞` returns the input unchanged.
pub fn add_awgn<R: Rng + ?Sized>(signal: &RealSignal, snr_db: f64, rng: &mut R) -> Result<RealSignal> {
    if signal.is_empty() {
        return Err(Error::data("cannot add noise to an empty signal"));
    }
    let noise = NoiseModel::calibrate(signal.power(), snr_db)?;
    if noise.variance == 0.0 {
        return Ok(signal.clone());
    }
    let sigma = noise.variance.sqrt();
    let samples = signal
        .samples
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            x + sigma * z
        })
        .collect();
    Ok(RealSignal::new(samples, signal.sample_rate_hz))
}

/// `nr × nt` path gains and timing offsets, row-major (`[receive][transmit]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    nt: usize,
    nr: usize,
    gains: Vec<f64>,
    offsets_s: Vec<f64>,
    symbol_period_s: f64,
}

impl ChannelMatrix {
    pub fn new(
        nt: usize,
        nr: usize,
        gains: Vec<f64>,
        offsets_s: Vec<f64>,
        symbol_period_s: f64,
    ) -> Result<Self> {
        if nt == 0 || nr < nt {
            return Err(Error::config(format!(
                "channel needs nr >= nt >= 1, got nt={nt}, nr={nr}"
            )));
        }
        if gains.len() != nt * nr || offsets_s.len() != nt * nr {
            return Err(Error::config("channel gain/offset tables must have nr*nt entries"));
        }
        if !(symbol_period_s > 0.0) {
            return Err(Error::config("symbol period must be positive"));
        }
        if gains.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::config("channel gains must lie in [0, 1]"));
        }
        if offsets_s.iter().any(|&d| !(0.0..symbol_period_s).contains(&d)) {
            return Err(Error::config("timing offsets must lie in [0, T_s)"));
        }
        Ok(Self {
            nt,
            nr,
            gains,
            offsets_s,
            symbol_period_s,
        })
    }

    /// Unit gains on the diagonal, zero elsewhere, no timing offsets.
    pub fn identity(n: usize, symbol_period_s: f64) -> Result<Self> {
        let mut gains = vec![0.0; n * n];
        (0..n).for_each(|i| gains[i * n + i] = 1.0);
        Self::new(n, n, gains, vec![0.0; n * n], symbol_period_s)
    }

    /// A 1×1 channel with attenuation `gain` (the SISO model).
    pub fn siso(gain: f64, symbol_period_s: f64) -> Result<Self> {
        Self::new(1, 1, vec![gain], vec![0.0], symbol_period_s)
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn gain(&self, rx: usize, tx: usize) -> f64 {
        self.gains[rx * self.nt + tx]
    }

    pub fn offset_s(&self, rx: usize, tx: usize) -> f64 {
        self.offsets_s[rx * self.nt + tx]
    }

    pub fn symbol_period_s(&self) -> f64 {
        self.symbol_period_s
    }

    /// Timing offset of a path rounded to whole samples.
    pub fn offset_samples(&self, rx: usize, tx: usize, sample_rate_hz: f64) -> usize {
        (self.offset_s(rx, tx) * sample_rate_hz).round() as usize
    }

    /// Smallest singular value of the gain matrix.
    pub fn min_singular_value(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.nr, self.nt, &self.gains);
        m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Draws a channel with i.i.d. uniform `[0, 1]` gains and uniform `[0, T_s)`
/// timing offsets, redrawing until the gain matrix has full column rank
/// (smallest singular value at least [`RANK_GUARD`]).
pub fn sample_channel<R: Rng + ?Sized>(
    nt: usize,
    nr: usize,
    symbol_period_s: f64,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    sample_channel_with(nt, nr, symbol_period_s, || {
        let gains = (0..nt * nr).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let offsets = (0..nt * nr)
            .map(|_| rng.gen_range(0.0..symbol_period_s))
            .collect();
        (gains, offsets)
    })
}

fn sample_channel_with<F>(nt: usize, nr: usize, symbol_period_s: f64, mut draw: F) -> Result<ChannelMatrix>
where
    F: FnMut() -> (Vec<f64>, Vec<f64>),
{
    if nt == 0 || nr < nt {
        return Err(Error::config(format!(
            "channel needs nr >= nt >= 1, got nt={nt}, nr={nr}"
        )));
    }
    for _ in 0..MAX_CHANNEL_DRAWS {
        let (gains, offsets) = draw();
        let ch = ChannelMatrix::new(nt, nr, gains, offsets, symbol_period_s)?;
        if ch.min_singular_value() >= RANK_GUARD {
            return Ok(ch);
        }
        log::debug!("rejecting rank-deficient channel draw");
    }
    Err(Error::Numeric(format!(
        "no full-rank {nr}x{nt} channel after {MAX_CHANNEL_DRAWS} draws"
    )))
}

/// Signals observed on every receive antenna for one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBundle {
    pub branches: Vec<RealSignal>,
    pub truth_label: Option<ModulationScheme>,
    pub snr_db: f64,
}

impl ReceivedBundle {
    pub fn labeled(mut self, scheme: ModulationScheme) -> Self {
        self.truth_label = Some(scheme);
        self
    }
}

/// Noiseless channel output for every receive branch.
pub fn propagate(streams: &[RealSignal], ch: &ChannelMatrix) -> Result<Vec<RealSignal>> {
    if streams.len() != ch.nt() {
        return Err(Error::data(format!(
            "channel expects {} transmit streams, got {}",
            ch.nt(),
            streams.len()
        )));
    }
    let first = &streams[0];
    let len = first.len();
    let fs = first.sample_rate_hz;
    if len == 0 {
        return Err(Error::data("transmit streams are empty"));
    }
    if streams.iter().any(|s| s.len() != len || s.sample_rate_hz != fs) {
        return Err(Error::data("transmit streams differ in length or sample rate"));
    }
    let branches = (0..ch.nr())
        .map(|rx| {
            let mut y = vec![0.0; len];
            for (tx, stream) in streams.iter().enumerate() {
                let g = ch.gain(rx, tx);
                let d = ch.offset_samples(rx, tx, fs).min(len);
                for (out, &x) in y[d..].iter_mut().zip(&stream.samples) {
                    *out += g * x;
                }
            }
            RealSignal::new(y, fs)
        })
        .collect();
    Ok(branches)
}

/// Sends `nt` streams through `ch` and adds per-branch noise at `snr_db`.
pub fn mimo_transmit<R: Rng + ?Sized>(
    streams: &[RealSignal],
    ch: &ChannelMatrix,
    snr_db: f64,
    rng: &mut R,
) -> Result<ReceivedBundle> {
    let clean = propagate(streams, ch)?;
    let branches = clean
        .iter()
        .map(|y| add_awgn(y, snr_db, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReceivedBundle {
        branches,
        truth_label: None,
        snr_db,
    })
}

/// `y = h·x + n`.
pub fn siso_transmit<R: Rng + ?Sized>(
    signal: &RealSignal,
    gain: f64,
    symbol_period_s: f64,
    snr_db: f64,
    rng: &mut R,
) -> Result<RealSignal> {
    let ch = ChannelMatrix::siso(gain, symbol_period_s)?;
    let mut bundle = mimo_transmit(std::slice::from_ref(signal), &ch, snr_db, rng)?;
    Ok(bundle.branches.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::sigsynth::{generate_symbols, modulate, SignalParams, THETA1};

    fn test_signal(seed_value: u64) -> RealSignal {
        let params = SignalParams::default();
        let seq = generate_symbols(4, 14, &mut seed::rng(seed_value)).unwrap();
        modulate(THETA1[5], &seq, &params).unwrap()
    }

    #[test]
    fn infinite_snr_is_identity() {
        let x = test_signal(1);
        let y = add_awgn(&x, f64::INFINITY, &mut seed::rng(2)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_power_rejected() {
        let x = RealSignal::new(vec![0.0; 100], 16_000.0);
        assert!(matches!(add_awgn(&x, 10.0, &mut seed::rng(0)), Err(Error::Data(_))));
        assert!(add_awgn(&RealSignal::new(vec![], 1.0), 10.0, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn awgn_realized_snr_matches_target() {
        let x = test_signal(4);
        let p = x.power();
        let mut acc = 0.0;
        for s in 0..100 {
            let y = add_awgn(&x, 10.0, &mut seed::rng(s)).unwrap();
            let pn = y
                .samples
                .iter()
                .zip(&x.samples)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / x.len() as f64;
            acc += 10.0 * (p / pn).log10();
        }
        let mean = acc / 100.0;
        assert!((mean - 10.0).abs() < 0.2, "mean SNR {mean}");
    }

    #[test]
    fn sampled_channel_ranges() {
        let ch = sample_channel(2, 4, 0.01, &mut seed::rng(8)).unwrap();
        assert_eq!((ch.nr(), ch.nt()), (4, 2));
        for rx in 0..4 {
            for tx in 0..2 {
                assert!((0.0..=1.0).contains(&ch.gain(rx, tx)));
                assert!((0.0..0.01).contains(&ch.offset_s(rx, tx)));
            }
        }
        assert!(ch.min_singular_value() >= RANK_GUARD);
        let again = sample_channel(2, 4, 0.01, &mut seed::rng(8)).unwrap();
        assert_eq!(ch, again);
    }

    #[test]
    fn scalar_channel_shape() {
        let ch = sample_channel(1, 1, 0.01, &mut seed::rng(8)).unwrap();
        assert_eq!((ch.nr(), ch.nt()), (1, 1));
    }

    #[test]
    fn invalid_shape_rejected() {
        assert!(matches!(sample_channel(3, 2, 0.01, &mut seed::rng(0)), Err(Error::Config(_))));
        assert!(sample_channel(0, 2, 0.01, &mut seed::rng(0)).is_err());
    }

    #[test]
    fn rank_guard_redraws_singular_matrices() {
        let mut calls = 0;
        let ch = sample_channel_with(2, 4, 0.01, || {
            calls += 1;
            if calls == 1 {
                // identical columns: rank one
                (vec![0.5; 8], vec![0.0; 8])
            } else {
                (vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.2, 0.3], vec![0.0; 8])
            }
        })
        .unwrap();
        assert_eq!(calls, 2);
        let svd = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.2, 0.3]).singular_values();
        assert!(svd.iter().all(|&s| s >= RANK_GUARD));
        assert!(ch.min_singular_value() >= RANK_GUARD);
    }

    #[test]
    fn identity_channel_passes_streams() {
        let xs = vec![test_signal(1), test_signal(2)];
        let ch = ChannelMatrix::identity(2, 0.01).unwrap();
        let out = mimo_transmit(&xs, &ch, f64::INFINITY, &mut seed::rng(0)).unwrap();
        assert_eq!(out.branches, xs);
    }

    #[test]
    fn mimo_branches_are_weighted_delayed_sums() {
        let xs = vec![test_signal(1), test_signal(2)];
        let ch = sample_channel(2, 4, 0.01, &mut seed::rng(3)).unwrap();
        let out = mimo_transmit(&xs, &ch, f64::INFINITY, &mut seed::rng(0)).unwrap();
        assert_eq!(out.branches.len(), 4);
        for (rx, y) in out.branches.iter().enumerate() {
            assert_eq!(y.len(), 2240);
            for n in [0usize, 100, 1000, 2239] {
                let mut expect = 0.0;
                for tx in 0..2 {
                    let d = ch.offset_samples(rx, tx, 16_000.0);
                    if n >= d {
                        expect += ch.gain(rx, tx) * xs[tx].samples[n - d];
                    }
                }
                assert!((y.samples[n] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_path_gain_scales_power() {
        let x = test_signal(6);
        let g = 0.37;
        let ch = ChannelMatrix::new(1, 1, vec![g], vec![0.0], 0.01).unwrap();
        let y = propagate(std::slice::from_ref(&x), &ch).unwrap().remove(0);
        assert!((y.power() - g * g * x.power()).abs() < 1e-9);
        let delayed = ChannelMatrix::new(1, 1, vec![g], vec![0.005], 0.01).unwrap();
        let y = propagate(std::slice::from_ref(&x), &delayed).unwrap().remove(0);
        let d = delayed.offset_samples(0, 0, 16_000.0);
        assert_eq!(d, 80);
        let tail: f64 = x.samples[x.len() - d..].iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((y.power() - g * g * (x.power() - tail)).abs() < 1e-9);
    }

    #[test]
    fn noiseless_mimo_is_linear() {
        let (a, b) = (test_signal(1), test_signal(2));
        let (c, d) = (test_signal(3), test_signal(4));
        let ch = sample_channel(2, 4, 0.01, &mut seed::rng(5)).unwrap();
        let sum = |u: &RealSignal, v: &RealSignal| {
            RealSignal::new(u.samples.iter().zip(&v.samples).map(|(p, q)| p + q).collect(), u.sample_rate_hz)
        };
        let y1 = propagate(&[a.clone(), b.clone()], &ch).unwrap();
        let y2 = propagate(&[c.clone(), d.clone()], &ch).unwrap();
        let y12 = propagate(&[sum(&a, &c), sum(&b, &d)], &ch).unwrap();
        for rx in 0..4 {
            for n in 0..a.len() {
                let lhs = y12[rx].samples[n];
                let rhs = y1[rx].samples[n] + y2[rx].samples[n];
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn branch_noise_is_uncorrelated() {
        let x = test_signal(1);
        let ch = ChannelMatrix::new(1, 4, vec![1.0; 4], vec![0.0; 4], 0.01).unwrap();
        let out = mimo_transmit(std::slice::from_ref(&x), &ch, 0.0, &mut seed::rng(12)).unwrap();
        let noise: Vec<Vec<f64>> = out
            .branches
            .iter()
            .map(|y| y.samples.iter().zip(&x.samples).map(|(a, b)| a - b).collect())
            .collect();
        let corr = |u: &[f64], v: &[f64]| {
            let n = u.len() as f64;
            let (mu, mv) = (u.iter().sum::<f64>() / n, v.iter().sum::<f64>() / n);
            let cov: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum();
            let su: f64 = u.iter().map(|a| (a - mu).powi(2)).sum::<f64>().sqrt();
            let sv: f64 = v.iter().map(|b| (b - mv).powi(2)).sum::<f64>().sqrt();
            cov / (su * sv)
        };
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(corr(&noise[i], &noise[j]).abs() < 0.05);
            }
        }
    }

    #[test]
    fn mismatched_streams_rejected() {
        let a = test_signal(1);
        let b = RealSignal::new(vec![1.0; 100], 16_000.0);
        let ch = ChannelMatrix::identity(2, 0.01).unwrap();
        assert!(matches!(mimo_transmit(&[a.clone(), b], &ch, 10.0, &mut seed::rng(0)), Err(Error::Data(_))));
        assert!(mimo_transmit(&[a], &ch, 10.0, &mut seed::rng(0)).is_err());
    }
}
