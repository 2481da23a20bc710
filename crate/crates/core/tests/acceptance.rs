//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! `MODCLASS_ACCEPTANCE=1,2,5` runs a subset; `MODCLASS_THREADS` fixes the
//! worker count.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use modclass::channel::siso_transmit;
use modclass::cnn::{Conv2d, CnnModel, Dense, InputShape, Layer, Mode};
use modclass::fusion::{fuse, FusionRule};
use modclass::harness::{run_in_memory, EvalMetrics, ExperimentConfig, Outcome, Scenario};
use modclass::seed;
use modclass::sigsynth::{generate_symbols, modulate, ModulationScheme, RealSignal, SignalParams, SymbolSequence, THETA1};
use modclass::tfa::{dominant_bands, spectrogram_matrix, stft_magnitude, SpectrogramMatrix, StftConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

// criterion 1
const ORACLE_SIGNALS: usize = 50;
const ORACLE_REL_TOL: f64 = 1e-9;
const ORACLE_MAX_RUNTIME: Duration = Duration::from_secs(60);
// criterion 2
const EXPECTED_FRAMES: usize = 385;
const EXPECTED_HEIGHT: usize = 1023;
// criterion 3
const SNR_TARGETS_DB: [f64; 3] = [-4.0, 0.0, 10.0];
const SNR_SEEDS: u64 = 100;
const SNR_TOL_DB: f64 = 0.3;
// criterion 4
const FD_EPS: f64 = 1e-4;
const FD_REL_TOL: f64 = 1e-4;
const FD_REL_FLOOR: f64 = 1e-6;
const GRADCHECK_MAX_RUNTIME: Duration = Duration::from_secs(120);
// criterion 5
const TIE_DRAWS: u64 = 10_000;
const TIE_TOL: f64 = 0.05;
// criterion 6
const SISO_MIN_ACC_10DB: f64 = 0.85;
const SISO_MIN_ACC_M4DB: f64 = 0.65;
const SISO_MIN_FSK_ACC_10DB: f64 = 0.95;
const SISO_MAX_RUNTIME: Duration = Duration::from_secs(30 * 60);
const MASTER_SEED: u64 = 1;
// criterion 7
const MIMO_EPOCHS: usize = 10;
const MIMO_MIN_FUSION_GAIN_M4DB: f64 = 0.03;
const MIMO_MIN_FUSED_ACC_10DB: f64 = 0.60;
// criterion 8
const BAND_THRESHOLD: f64 = 0.25;
const BAND_SEEDS: u64 = 20;
const INVARIANCE_TOL: f64 = 1e-9;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scheme(s: &str) -> ModulationScheme {
    s.parse().unwrap()
}

// ---------------------------------------------------------------------------
// 1, 2: STFT

/// Direct evaluation: Hamming-windowed frames at hop `δ`, zero-padded
/// N-point DFT evaluated term by term, bins 1..N/2-1, global min-max.
struct DirectStft {
    window: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
    hop: usize,
    n: usize,
}

impl DirectStft {
    fn new(cfg: &StftConfig) -> Self {
        let ws = cfg.window_len;
        let n = cfg.fft_points;
        let window = (0..ws)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (ws - 1) as f64).cos())
            .collect();
        let angle = |j: usize| 2.0 * PI * j as f64 / n as f64;
        Self {
            window,
            cos: (0..n).map(|j| angle(j).cos()).collect(),
            sin: (0..n).map(|j| angle(j).sin()).collect(),
            hop: cfg.window_len - cfg.overlap_len,
            n,
        }
    }

    /// `(rows = bins, cols = frames)` row-major magnitudes.
    fn magnitudes(&self, x: &[f64]) -> (usize, usize, Vec<f64>) {
        let ws = self.window.len();
        let frames = (x.len() - (ws - self.hop)) / self.hop;
        let bins = self.n / 2 - 1;
        let mut out = vec![0.0; bins * frames];
        let mut seg = vec![0.0; ws];
        for m in 0..frames {
            for i in 0..ws {
                seg[i] = x[m * self.hop + i] * self.window[i];
            }
            for k in 1..=bins {
                let (mut re, mut im) = (0.0, 0.0);
                let mut idx = 0;
                for &v in &seg {
                    re += v * self.cos[idx];
                    im -= v * self.sin[idx];
                    idx += k;
                    if idx >= self.n {
                        idx -= self.n;
                    }
                }
                out[(k - 1) * frames + m] = re.hypot(im);
            }
        }
        (bins, frames, out)
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let cfg = StftConfig::default();
    let direct = DirectStft::new(&cfg);
    let mut rng = seed::rng(0x0C1);
    let (mut worst_s, mut worst_g) = (0.0f64, 0.0f64);
    for i in 0..ORACLE_SIGNALS {
        // alternate white noise and modulated waveforms
        let x: Vec<f64> = if i % 2 == 0 {
            (0..2240).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        } else {
            let s = THETA1[(i / 2) % THETA1.len()];
            let seq = generate_symbols(s.order(), 14, &mut rng).unwrap();
            modulate(s, &seq, &SignalParams::default()).unwrap().samples
        };
        let y = RealSignal::new(x.clone(), 16_000.0);
        let fast = stft_magnitude(&y, &cfg).unwrap();
        let g = spectrogram_matrix(&y, &cfg).unwrap();
        let (rows, cols, reference) = direct.magnitudes(&x);
        if (fast.rows, fast.cols) != (rows, cols) {
            return Err(format!("shape {}x{} vs direct {rows}x{cols}", fast.rows, fast.cols));
        }
        let peak = reference.iter().copied().fold(0.0, f64::max);
        worst_s = worst_s.max(max_abs_diff(&fast.data, &reference) / peak);
        worst_g = worst_g.max(max_abs_diff(&g.data, &normalized(&reference)));
    }
    let elapsed = start.elapsed();
    ensure(
        worst_s <= ORACLE_REL_TOL && worst_g <= ORACLE_REL_TOL && elapsed < ORACLE_MAX_RUNTIME,
        format!(
            "{ORACLE_SIGNALS} signals: |S| rel err {worst_s:.2e}, G abs err {worst_g:.2e} (tol {ORACLE_REL_TOL:e}), {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Check {
    let cfg = StftConfig::default();
    let frames = cfg.num_frames(2240).map_err(|e| e.to_string())?;
    let g = spectrogram_matrix(
        &modulate(
            scheme("2psk"),
            &SymbolSequence::new(vec![0, 1].repeat(7), 2).unwrap(),
            &SignalParams::default(),
        )
        .unwrap(),
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        frames == EXPECTED_FRAMES && cfg.num_bins() == EXPECTED_HEIGHT && (g.rows, g.cols) == (EXPECTED_HEIGHT, EXPECTED_FRAMES),
        format!("N_F = {frames}, height = {}, matrix {}x{}", cfg.num_bins(), g.rows, g.cols),
    )
}

// ---------------------------------------------------------------------------
// 3: AWGN

fn criterion_3() -> Check {
    let params = SignalParams::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for target in SNR_TARGETS_DB {
        let mut sum = 0.0;
        for s in 0..SNR_SEEDS {
            let mut rng = seed::derived_rng(0x0C3, &[s, target.to_bits()]);
            let sc = THETA1[s as usize % THETA1.len()];
            let seq = generate_symbols(sc.order(), params.num_symbols, &mut rng).unwrap();
            let x = modulate(sc, &seq, &params).unwrap();
            let y = siso_transmit(&x, 1.0, params.symbol_period_s(), target, &mut rng).unwrap();
            let noise: Vec<f64> = y.samples.iter().zip(&x.samples).map(|(a, b)| a - b).collect();
            let pn = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
            sum += 10.0 * (x.power() / pn).log10();
        }
        let mean = sum / SNR_SEEDS as f64;
        ok &= (mean - target).abs() <= SNR_TOL_DB;
        parts.push(format!("{target} dB -> {mean:.3} dB"));
    }
    ensure(ok, format!("{} (tol ±{SNR_TOL_DB} dB, {SNR_SEEDS} seeds)", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 4: gradients

/// Worst relative error between analytic and central-difference gradients of
/// the mean cross-entropy, over every parameter of `model`.
fn gradcheck(mut model: CnnModel<f64>, batch: usize, mode: Mode, rng: &mut impl Rng) -> f64 {
    for p in model.params_mut() {
        p.iter_mut().for_each(|v| *v += rng.gen_range(-0.05..0.05));
    }
    let s = model.input_shape();
    let k = model.num_classes();
    let xs: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..s.height * s.width * s.channels).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let labels: Vec<usize> = (0..batch).map(|i| i % k).collect();
    let (_, grads) = model.loss_and_grads(&refs, &labels, mode).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..grads.tensors.len() {
        for i in 0..grads.tensors[t].len() {
            let orig = model.params_mut()[t][i];
            model.params_mut()[t][i] = orig + FD_EPS;
            let lp = model.loss_and_grads(&refs, &labels, mode).unwrap().0;
            model.params_mut()[t][i] = orig - FD_EPS;
            let lm = model.loss_and_grads(&refs, &labels, mode).unwrap().0;
            model.params_mut()[t][i] = orig;
            let (a, b) = (grads.tensors[t][i], (lp - lm) / (2.0 * FD_EPS));
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(FD_REL_FLOOR));
        }
    }
    worst
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let mut rng = seed::rng(0x0C4);
    let r = &mut rng;
    let eval = Mode::Eval;
    let train = Mode::Train { seed: 5 };
    let mut cases: Vec<(&str, CnnModel<f64>, Mode)> = Vec::new();
    let shape = InputShape::new(5, 5, 2);
    cases.push((
        "conv2d+flatten",
        CnnModel::from_layers(
            shape,
            3,
            vec![
                Layer::Conv2d(Conv2d::he(2, 3, 3, r)),
                Layer::Flatten,
                Layer::Dense(Dense::he(75, 3, r)),
                Layer::Softmax,
            ],
        )
        .unwrap(),
        eval,
    ));
    cases.push((
        "dense+softmax",
        CnnModel::from_layers(shape, 3, vec![Layer::Flatten, Layer::Dense(Dense::he(50, 3, r)), Layer::Softmax]).unwrap(),
        eval,
    ));
    cases.push((
        "relu",
        CnnModel::from_layers(
            shape,
            3,
            vec![
                Layer::Flatten,
                Layer::Dense(Dense::he(50, 8, r)),
                Layer::Relu,
                Layer::Dense(Dense::he(8, 3, r)),
                Layer::Softmax,
            ],
        )
        .unwrap(),
        eval,
    ));
    cases.push((
        "maxpool",
        CnnModel::from_layers(
            InputShape::new(4, 6, 2),
            3,
            vec![
                Layer::Conv2d(Conv2d::he(2, 2, 3, r)),
                Layer::MaxPool2d { size: 2 },
                Layer::Flatten,
                Layer::Dense(Dense::he(12, 3, r)),
                Layer::Softmax,
            ],
        )
        .unwrap(),
        eval,
    ));
    cases.push((
        "dropout",
        CnnModel::from_layers(
            shape,
            3,
            vec![
                Layer::Flatten,
                Layer::Dense(Dense::he(50, 8, r)),
                Layer::Dropout { rate: 0.3 },
                Layer::Dense(Dense::he(8, 3, r)),
                Layer::Softmax,
            ],
        )
        .unwrap(),
        train,
    ));
    cases.push((
        "composed",
        CnnModel::from_layers(
            InputShape::new(8, 8, 3),
            2,
            vec![
                Layer::Conv2d(Conv2d::he(3, 4, 3, r)),
                Layer::Relu,
                Layer::MaxPool2d { size: 2 },
                Layer::Conv2d(Conv2d::he(4, 4, 3, r)),
                Layer::Relu,
                Layer::MaxPool2d { size: 2 },
                Layer::Flatten,
                Layer::Dense(Dense::he(16, 6, r)),
                Layer::Relu,
                Layer::Dropout { rate: 0.25 },
                Layer::Dense(Dense::he(6, 2, r)),
                Layer::Softmax,
            ],
        )
        .unwrap(),
        train,
    ));
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, model, mode) in cases {
        let err = gradcheck(model, 3, mode, &mut rng);
        ok &= err < FD_REL_TOL;
        parts.push(format!("{name} {err:.1e}"));
    }
    let elapsed = start.elapsed();
    ensure(
        ok && elapsed < GRADCHECK_MAX_RUNTIME,
        format!("worst rel err: {} (tol {FD_REL_TOL:e}), {:.1} s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------------------
// 5: fusion

fn criterion_5() -> Check {
    let [p2, p4, p8] = [scheme("2psk"), scheme("4psk"), scheme("8psk")];
    let a = fuse(&[p2, p2, p4, p8], FusionRule::Majority, &mut seed::rng(0)).map_err(|e| e.to_string())?;
    let mut wins = 0u64;
    for s in 0..TIE_DRAWS {
        let out = fuse(&[p2, p2, p4, p4], FusionRule::Majority, &mut seed::rng(s)).unwrap();
        if out.final_label == Some(p2) {
            wins += 1;
        }
    }
    let share = wins as f64 / TIE_DRAWS as f64;
    ensure(
        a.final_label == Some(p2) && !a.tie_broken && (share - 0.5).abs() <= TIE_TOL,
        format!(
            "[2PSK,2PSK,4PSK,8PSK] -> {}; [2PSK,2PSK,4PSK,4PSK] -> 2PSK in {share:.4} of {TIE_DRAWS} draws (tol ±{TIE_TOL})",
            a.final_label.map_or("undecided".into(), |l| l.to_string())
        ),
    )
}

// ---------------------------------------------------------------------------
// 6, 7, 9: end-to-end experiments

fn siso_config() -> ExperimentConfig {
    ExperimentConfig {
        master_seed: MASTER_SEED,
        ..ExperimentConfig::default()
    }
}

fn mimo_config() -> ExperimentConfig {
    let mut cfg = siso_config();
    cfg.scenario = Scenario::Mimo { nt: 2, nr: 4 };
    cfg.train.epochs = MIMO_EPOCHS;
    cfg
}

fn accuracy_line(m: &EvalMetrics) -> String {
    m.per_snr
        .iter()
        .map(|s| {
            if m.scenario == Scenario::Siso {
                format!("{}:{:.3}", s.snr_db, s.acc_fused)
            } else {
                format!("{}:{:.3}/{:.3}", s.snr_db, s.acc_no_fusion, s.acc_fused)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_6(outcome: &mut Option<Outcome>) -> Check {
    let start = Instant::now();
    let out = run_in_memory(&siso_config()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let m = &out.metrics;
    let at = |snr: f64| m.at_snr(snr).ok_or(format!("no results at {snr} dB"));
    let (hi, lo) = (at(10.0)?, at(-4.0)?);
    let class_acc = |name: &str| {
        let k = m.classes.iter().position(|c| *c == scheme(name)).unwrap();
        hi.confusion.class_accuracy(k)
    };
    let (f2, f4) = (class_acc("2fsk"), class_acc("4fsk"));
    let detail = format!(
        "acc@10dB {:.4} (>= {SISO_MIN_ACC_10DB}), acc@-4dB {:.4} (>= {SISO_MIN_ACC_M4DB}), 2FSK/4FSK@10dB {f2:.3}/{f4:.3} (>= {SISO_MIN_FSK_ACC_10DB}), {:.1} min [{}]",
        hi.acc_fused,
        lo.acc_fused,
        elapsed.as_secs_f64() / 60.0,
        accuracy_line(m)
    );
    let ok = hi.acc_fused >= SISO_MIN_ACC_10DB
        && lo.acc_fused >= SISO_MIN_ACC_M4DB
        && f2 >= SISO_MIN_FSK_ACC_10DB
        && f4 >= SISO_MIN_FSK_ACC_10DB
        && elapsed <= SISO_MAX_RUNTIME;
    *outcome = Some(out);
    ensure(ok, detail)
}

fn criterion_7() -> Check {
    let start = Instant::now();
    let out = run_in_memory(&mimo_config()).map_err(|e| e.to_string())?;
    let m = &out.metrics;
    let at = |snr: f64| m.at_snr(snr).ok_or(format!("no results at {snr} dB"));
    let (lo, hi) = (at(-4.0)?, at(10.0)?);
    let gain = lo.acc_fused - lo.acc_no_fusion;

    let c = m.confusion();
    let idx = |n: &str| m.classes.iter().position(|s| *s == scheme(n)).unwrap();
    let (i4, i8) = (idx("4psk"), idx("8psk"));
    let intra = c.count(i4, i8) + c.count(i8, i4);
    let psk: Vec<usize> = ["2psk", "4psk", "8psk"].iter().map(|n| idx(n)).collect();
    let worst_cross = psk
        .iter()
        .flat_map(|&p| (0..m.classes.len()).filter(|q| !psk.contains(q)).map(move |q| (p, q)))
        .map(|(p, q)| (c.count(p, q), p, q))
        .max()
        .unwrap();
    ensure(
        gain >= MIMO_MIN_FUSION_GAIN_M4DB && hi.acc_fused >= MIMO_MIN_FUSED_ACC_10DB && intra > worst_cross.0,
        format!(
            "-4dB fused {:.4} vs per-antenna {:.4} (gain {:+.4}, >= {MIMO_MIN_FUSION_GAIN_M4DB}); fused@10dB {:.4} (>= {MIMO_MIN_FUSED_ACC_10DB}); 4PSK<->8PSK {intra} vs max PSK->non-PSK {} ({}->{}); {:.1} min [no-fusion/fused {}]",
            lo.acc_fused,
            lo.acc_no_fusion,
            gain,
            hi.acc_fused,
            worst_cross.0,
            m.classes[worst_cross.1],
            m.classes[worst_cross.2],
            start.elapsed().as_secs_f64() / 60.0,
            accuracy_line(m)
        ),
    )
}

fn criterion_9(first: Option<&Outcome>) -> Check {
    let fresh;
    let a = match first {
        Some(o) => o,
        None => {
            fresh = run_in_memory(&siso_config()).map_err(|e| e.to_string())?;
            &fresh
        }
    };
    let b = run_in_memory(&siso_config()).map_err(|e| e.to_string())?;
    let bits = |m: &CnnModel<f32>| -> Vec<u32> { m.params().iter().flat_map(|p| p.iter().map(|v| v.to_bits())).collect() };
    let history = |o: &Outcome| -> Vec<(u64, u64)> {
        o.history
            .epochs
            .iter()
            .map(|e| (e.train_loss.to_bits(), e.val_acc.to_bits()))
            .collect()
    };
    let same_metrics = serde_json::to_string(&a.metrics).unwrap() == serde_json::to_string(&b.metrics).unwrap()
        && a.metrics == b.metrics;
    let same_weights = bits(&a.model) == bits(&b.model);
    let same_history = history(a) == history(&b);
    ensure(
        same_metrics && same_weights && same_history,
        format!(
            "metrics identical: {same_metrics}, weights identical: {same_weights}, training history identical: {same_history} ({} threads)",
            rayon::current_num_threads()
        ),
    )
}

// ---------------------------------------------------------------------------
// 8: qualitative spectrogram checks

fn fsk_bands(order: u32, symbols: Vec<u32>) -> usize {
    let s = if order == 2 { scheme("2fsk") } else { scheme("4fsk") };
    let y = modulate(s, &SymbolSequence::new(symbols, order).unwrap(), &SignalParams::default()).unwrap();
    let stft = StftConfig::default();
    dominant_bands(&spectrogram_matrix(&y, &stft).unwrap(), BAND_THRESHOLD, stft.main_lobe_hz(16_000.0))
}

fn criterion_8() -> Check {
    let mut problems = Vec::new();
    // balanced tone usage in random order
    let (mut fsk2, mut fsk4, mut random4) = (0, 0, 0);
    for s in 0..BAND_SEEDS {
        let mut rng = seed::derived_rng(0x0C8, &[s]);
        let mut two: Vec<u32> = (0..14).map(|i| i % 2).collect();
        two.shuffle(&mut rng);
        fsk2 += (fsk_bands(2, two) == 2) as u64;
        let mut four: Vec<u32> = (0..14).map(|i| i % 4).collect();
        four.shuffle(&mut rng);
        fsk4 += (fsk_bands(4, four) == 4) as u64;
        let free = generate_symbols(4, 14, &mut rng).unwrap().symbols().to_vec();
        random4 += (fsk_bands(4, free) == 4) as u64;
    }
    if fsk2 != BAND_SEEDS || fsk4 != BAND_SEEDS {
        problems.push("band count".to_string());
    }

    let cfg = StftConfig::default();
    let mut rng = seed::rng(0x0C8);
    let base: Vec<f64> = (0..2240).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let g = |x: &[f64]| -> SpectrogramMatrix { spectrogram_matrix(&RealSignal::new(x.to_vec(), 16_000.0), &cfg).unwrap() };
    let g0 = g(&base);
    let mut scale_err: f64 = 0.0;
    for c in [1e-3, 0.37, 5.0, 1e4] {
        let scaled: Vec<f64> = base.iter().map(|v| v * c).collect();
        scale_err = scale_err.max(max_abs_diff(&g(&scaled).data, &g0.data));
    }
    if scale_err > INVARIANCE_TOL {
        problems.push("amplitude invariance".into());
    }

    // zero guards on both sides keep the global min/max identical
    let hop = cfg.window_len - cfg.overlap_len;
    let pad = cfg.window_len + hop;
    let framed = |lead: usize| -> Vec<f64> {
        let mut x = vec![0.0; lead];
        x.extend_from_slice(&base);
        x.resize(base.len() + 2 * pad, 0.0);
        x
    };
    let (a, b) = (g(&framed(pad)), g(&framed(pad + hop)));
    let mut shift_err: f64 = 0.0;
    for col in 0..a.cols - 1 {
        for row in 0..a.rows {
            shift_err = shift_err.max((b.get(row, col + 1) - a.get(row, col)).abs());
        }
    }
    if shift_err > INVARIANCE_TOL {
        problems.push("time shift".into());
    }
    ensure(
        problems.is_empty(),
        format!(
            "balanced 2FSK->2 bands {fsk2}/{BAND_SEEDS}, 4FSK->4 bands {fsk4}/{BAND_SEEDS} (unconstrained random 4FSK: {random4}/{BAND_SEEDS}); scale err {scale_err:.1e}; shift err {shift_err:.1e} (tol {INVARIANCE_TOL:e}){}",
            if problems.is_empty() { String::new() } else { format!("; failed: {}", problems.join(", ")) }
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    if let Ok(v) = std::env::var("MODCLASS_THREADS") {
        let n: usize = v.parse().expect("MODCLASS_THREADS must be a positive integer");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().unwrap();
    }
    let selected: Vec<u32> = match std::env::var("MODCLASS_ACCEPTANCE") {
        Ok(v) if !v.trim().is_empty() => v.split(',').map(|s| s.trim().parse().expect("criterion number")).collect(),
        _ => (1..=9).collect(),
    };
    let names = [
        "STFT oracle equivalence",
        "frame/shape arithmetic",
        "AWGN calibration",
        "gradient checks",
        "fusion worked examples",
        "SISO accuracy",
        "MIMO fusion gain",
        "qualitative spectrogram checks",
        "determinism",
    ];
    let mut siso: Option<Outcome> = None;
    let mut failed = Vec::new();
    for id in selected {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| match id {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(&mut siso),
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(siso.as_ref()),
            other => Err(format!("no criterion {other}")),
        }))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let name = names.get(id as usize - 1).copied().unwrap_or("?");
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("criterion {id} {tag} {name}: {detail} [{:.1} s]", start.elapsed().as_secs_f64());
        if result.is_err() {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all selected criteria passed");
}
