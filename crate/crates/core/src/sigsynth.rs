//! Digital modulation synthesis: random symbol sources and real passband
//! MASK / MFSK / MPSK / MQAM waveforms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationFamily {
    Ask,
    Fsk,
    Psk,
    Qam,
}

impl ModulationFamily {
    fn tag(self) -> &'static str {
        match self {
            ModulationFamily::Ask => "ASK",
            ModulationFamily::Fsk => "FSK",
            ModulationFamily::Psk => "PSK",
            ModulationFamily::Qam => "QAM",
        }
    }
}

/// A modulation family together with its order `M`. This is the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModulationScheme {
    family: ModulationFamily,
    order: u32,
}

impl ModulationScheme {
    pub fn new(family: ModulationFamily, order: u32) -> Result<Self> {
        validate_order(order)?;
        if family == ModulationFamily::Qam {
            let root = integer_sqrt(order);
            if root * root != order || root < 2 {
                return Err(Error::config(format!(
                    "QAM order must be a perfect square, got {order}"
                )));
            }
        }
        Ok(Self { family, order })
    }

    pub const fn family(self) -> ModulationFamily {
        self.family
    }

    pub const fn order(self) -> u32 {
        self.order
    }

    const fn of(family: ModulationFamily, order: u32) -> Self {
        Self { family, order }
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.order, self.family.tag())
    }
}

impl FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find(|c: char| !c.is_ascii_digit())
            .ok_or_else(|| Error::config(format!("unrecognised modulation scheme `{s}`")))?;
        let (digits, family) = s.split_at(split);
        let order: u32 = digits
            .parse()
            .map_err(|_| Error::config(format!("unrecognised modulation scheme `{s}`")))?;
        let family = match family.to_ascii_uppercase().as_str() {
            "ASK" => ModulationFamily::Ask,
            "FSK" => ModulationFamily::Fsk,
            "PSK" => ModulationFamily::Psk,
            "QAM" => ModulationFamily::Qam,
            _ => return Err(Error::config(format!("unrecognised modulation scheme `{s}`"))),
        };
        ModulationScheme::new(family, order)
    }
}

impl Serialize for ModulationScheme {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModulationScheme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The eight-class label set {2ASK, 2FSK, 2PSK, 4ASK, 4FSK, 4PSK, 8PSK, 16QAM}.
pub const THETA1: [ModulationScheme; 8] = [
    ModulationScheme::of(ModulationFamily::Ask, 2),
    ModulationScheme::of(ModulationFamily::Fsk, 2),
    ModulationScheme::of(ModulationFamily::Psk, 2),
    ModulationScheme::of(ModulationFamily::Ask, 4),
    ModulationScheme::of(ModulationFamily::Fsk, 4),
    ModulationScheme::of(ModulationFamily::Psk, 4),
    ModulationScheme::of(ModulationFamily::Psk, 8),
    ModulationScheme::of(ModulationFamily::Qam, 16),
];

/// The six-class subset {2ASK, 2FSK, 2PSK, 4ASK, 4FSK, 4PSK}.
pub const THETA2: [ModulationScheme; 6] = [
    THETA1[0], THETA1[1], THETA1[2], THETA1[3], THETA1[4], THETA1[5],
];

fn validate_order(order: u32) -> Result<()> {
    if order < 2 || !order.is_power_of_two() {
        return Err(Error::config(format!(
            "modulation order must be a power of two >= 2, got {order}"
        )));
    }
    Ok(())
}

fn integer_sqrt(n: u32) -> u32 {
    let mut r = (n as f64).sqrt() as u32;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseShape {
    Rectangular,
    RootRaisedCosine { rolloff: f64 },
}

impl PulseShape {
    fn rolloff(self) -> f64 {
        match self {
            PulseShape::Rectangular => 0.0,
            PulseShape::RootRaisedCosine { rolloff } => rolloff,
        }
    }
}

/// Waveform parameters. Defaults: 16 kHz sampling, 2 kHz carrier, 100 Hz
/// symbol rate, 14 symbols (2240 samples).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalParams {
    pub sample_rate_hz: f64,
    pub carrier_hz: f64,
    pub symbol_rate_hz: f64,
    pub num_symbols: usize,
    pub initial_phase_rad: f64,
    /// Draw a uniform initial phase per generated signal (dataset augmentation).
    pub random_initial_phase: bool,
    pub pulse_shape: PulseShape,
    pub fsk_tone_spacing_hz: f64,
    /// Scale QAM rails to unit average symbol energy.
    pub qam_unit_power: bool,
}

impl Default for SignalParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000.0,
            carrier_hz: 2_000.0,
            symbol_rate_hz: 100.0,
            num_symbols: 14,
            initial_phase_rad: 0.0,
            random_initial_phase: false,
            pulse_shape: PulseShape::Rectangular,
            fsk_tone_spacing_hz: 400.0,
            qam_unit_power: false,
        }
    }
}

impl SignalParams {
    /// Integer samples per symbol.
    pub fn samples_per_symbol(&self) -> Result<usize> {
        if !(self.sample_rate_hz > 0.0 && self.symbol_rate_hz > 0.0) {
            return Err(Error::config("sample and symbol rates must be positive"));
        }
        let ratio = self.sample_rate_hz / self.symbol_rate_hz;
        let sps = ratio.round();
        if (ratio - sps).abs() > 1e-9 * ratio || sps < 1.0 {
            return Err(Error::config(format!(
                "sample rate {} Hz is not an integer multiple of symbol rate {} Hz",
                self.sample_rate_hz, self.symbol_rate_hz
            )));
        }
        Ok(sps as usize)
    }

    pub fn signal_len(&self) -> Result<usize> {
        Ok(self.samples_per_symbol()? * self.num_symbols)
    }

    pub fn symbol_period_s(&self) -> f64 {
        1.0 / self.symbol_rate_hz
    }

    /// Checks the parameters for use with `scheme`, including the Nyquist
    /// condition on the highest occupied frequency.
    pub fn validate_for(&self, scheme: ModulationScheme) -> Result<()> {
        self.samples_per_symbol()?;
        if self.num_symbols == 0 {
            return Err(Error::config("num_symbols must be >= 1"));
        }
        if !(self.carrier_hz > 0.0) || !self.initial_phase_rad.is_finite() {
            return Err(Error::config("carrier must be positive and phase finite"));
        }
        let rolloff = self.pulse_shape.rolloff();
        if !(0.0..=1.0).contains(&rolloff) || (rolloff == 0.0 && matches!(self.pulse_shape, PulseShape::RootRaisedCosine { .. })) {
            return Err(Error::config(format!("RRC rolloff must be in (0, 1], got {rolloff}")));
        }
        let lobe = self.symbol_rate_hz * (1.0 + rolloff);
        let offset = match scheme.family() {
            ModulationFamily::Fsk => {
                if !(self.fsk_tone_spacing_hz > 0.0) {
                    return Err(Error::config("FSK tone spacing must be positive"));
                }
                0.5 * (scheme.order() - 1) as f64 * self.fsk_tone_spacing_hz
            }
            _ => 0.0,
        };
        if self.carrier_hz - offset <= 0.0 {
            return Err(Error::config(format!(
                "{scheme}: lowest tone {} Hz is not positive",
                self.carrier_hz - offset
            )));
        }
        let highest = self.carrier_hz + offset + lobe;
        if self.sample_rate_hz <= 2.0 * highest {
            return Err(Error::config(format!(
                "{scheme}: sample rate {} Hz violates Nyquist for content up to {highest} Hz",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    symbols: Vec<u32>,
    order: u32,
}

impl SymbolSequence {
    pub fn new(symbols: Vec<u32>, order: u32) -> Result<Self> {
        validate_order(order)?;
        if let Some(bad) = symbols.iter().find(|&&s| s >= order) {
            return Err(Error::data(format!("symbol {bad} out of range for order {order}")));
        }
        Ok(Self { symbols, order })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// A sampled real waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSignal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl RealSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    pub fn scaled(&self, factor: f64) -> RealSignal {
        RealSignal::new(self.samples.iter().map(|x| x * factor).collect(), self.sample_rate_hz)
    }
}

/// Draws `count` i.i.d. uniform symbols from `{0, .., order-1}`.
pub fn generate_symbols<R: Rng + ?Sized>(order: u32, count: usize, rng: &mut R) -> Result<SymbolSequence> {
    validate_order(order)?;
    if count == 0 {
        return Err(Error::config("symbol count must be >= 1"));
    }
    let symbols = (0..count).map(|_| rng.gen_range(0..order)).collect();
    Ok(SymbolSequence { symbols, order })
}

/// Per-symbol carrier description: `in_phase·cos(2π f t + phase) + quadrature·sin(2π f t + phase)`.
#[derive(Debug, Clone, Copy)]
struct SymbolTone {
    freq_hz: f64,
    phase: f64,
    in_phase: f64,
    quadrature: f64,
}

fn symbol_tone(scheme: ModulationScheme, symbol: u32, params: &SignalParams) -> SymbolTone {
    let m = symbol as f64;
    let order = scheme.order() as f64;
    let mut tone = SymbolTone {
        freq_hz: params.carrier_hz,
        phase: params.initial_phase_rad,
        in_phase: 1.0,
        quadrature: 0.0,
    };
    match scheme.family() {
        ModulationFamily::Ask => tone.in_phase = m / (order - 1.0),
        ModulationFamily::Fsk => {
            tone.freq_hz = params.carrier_hz + (m - (order - 1.0) / 2.0) * params.fsk_tone_spacing_hz
        }
        ModulationFamily::Psk => tone.phase += 2.0 * PI * m / order,
        ModulationFamily::Qam => {
            let side = integer_sqrt(scheme.order());
            let level = |idx: u32| 2.0 * (idx + 1) as f64 - 1.0 - side as f64;
            let mut a = level(symbol % side);
            let mut b = level(symbol / side);
            if params.qam_unit_power {
                // mean of a² + b² over the square grid is 2(M-1)/3
                let scale = (2.0 * (order - 1.0) / 3.0).sqrt();
                a /= scale;
                b /= scale;
            }
            tone.in_phase = a;
            tone.quadrature = b;
        }
    }
    tone
}

/// Root-raised-cosine impulse response at `t` seconds for symbol period `ts`.
fn rrc(t: f64, ts: f64, beta: f64) -> f64 {
    let x = t / ts;
    if x.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let edge = 1.0 / (4.0 * beta);
    if (x.abs() - edge).abs() < 1e-9 {
        let arg = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * x * (1.0 - beta)).sin() + 4.0 * beta * x * (PI * x * (1.0 + beta)).cos();
    let den = PI * x * (1.0 - (4.0 * beta * x).powi(2));
    num / den
}

/// Half-span of the truncated RRC pulse, in symbols.
const RRC_HALF_SPAN: usize = 4;

/// RRC taps centred at index `len / 2`, scaled so that their energy matches
/// a rectangular pulse of `sps` unit samples.
fn rrc_taps(sps: usize, beta: f64) -> Vec<f64> {
    let half = RRC_HALF_SPAN * sps;
    let ts = sps as f64;
    let mut taps: Vec<f64> = (0..=2 * half)
        .map(|i| rrc(i as f64 - half as f64, ts, beta))
        .collect();
    let energy: f64 = taps.iter().map(|g| g * g).sum();
    let scale = (sps as f64 / energy).sqrt();
    taps.iter_mut().for_each(|g| *g *= scale);
    taps
}

/// Synthesizes the real passband waveform for `symbols` under `scheme`.
///
/// Sample `i` sits at `t = i / f_s`; symbol `n` covers samples
/// `[n·sps, (n+1)·sps)`. With a rectangular pulse each sample depends on one
/// symbol only; with RRC the pulse of symbol `n` is centred on the middle of
/// its interval and truncated at ±4 symbols and at the signal edges.
pub fn modulate(scheme: ModulationScheme, symbols: &SymbolSequence, params: &SignalParams) -> Result<RealSignal> {
    if symbols.order() != scheme.order() {
        return Err(Error::config(format!(
            "symbol order {} does not match scheme {scheme}",
            symbols.order()
        )));
    }
    if symbols.len() != params.num_symbols {
        return Err(Error::config(format!(
            "expected {} symbols, got {}",
            params.num_symbols,
            symbols.len()
        )));
    }
    params.validate_for(scheme)?;
    let sps = params.samples_per_symbol()?;
    let len = sps * symbols.len();
    let fs = params.sample_rate_hz;
    let tones: Vec<SymbolTone> = symbols
        .symbols()
        .iter()
        .map(|&s| symbol_tone(scheme, s, params))
        .collect();
    let eval = |tone: &SymbolTone, i: usize| {
        let theta = 2.0 * PI * tone.freq_hz * (i as f64 / fs) + tone.phase;
        tone.in_phase * theta.cos() + tone.quadrature * theta.sin()
    };

    let mut samples = vec![0.0; len];
    match params.pulse_shape {
        PulseShape::Rectangular => {
            for (i, x) in samples.iter_mut().enumerate() {
                *x = eval(&tones[i / sps], i);
            }
        }
        PulseShape::RootRaisedCosine { rolloff } => {
            let taps = rrc_taps(sps, rolloff);
            let half = taps.len() / 2;
            for (n, tone) in tones.iter().enumerate() {
                let centre = n * sps + sps / 2;
                let start = centre.saturating_sub(half);
                let end = (centre + half + 1).min(len);
                for i in start..end {
                    let g = taps[i + half - centre];
                    samples[i] += g * eval(tone, i);
                }
            }
        }
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite sample in synthesized waveform".into()));
    }
    Ok(RealSignal::new(samples, fs))
}
