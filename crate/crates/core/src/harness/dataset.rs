//! Labeled spectrogram datasets.
//!
//! A dataset is a grid of `(SNR, class, index)` tasks. Each task is one
//! transmission: `nt` independent streams of the same class sent through a
//! fresh channel draw and observed on `nr` antennas, giving `nr` images. The
//! seed of a task derives from the master seed, the split and the task
//! coordinates, so training and test draws never share a random stream and any
//! subset can be regenerated on its own.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scenario};
use crate::channel::{mimo_transmit, sample_channel, siso_transmit, ReceivedBundle};
use crate::cnn::{hwc_to_chw, Dataset};
use crate::error::{Error, Result};
use crate::seed;
use crate::sigsynth::{generate_symbols, modulate, ModulationScheme, RealSignal, SignalParams};
use crate::tfa::{read_tfa, write_tfa, RgbImage};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn seed_domain(self) -> u64 {
        match self {
            Split::Train => 0x7241_494E,
            Split::Test => 0x5445_5354,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!("unknown split `{other}` (expected train or test)"))),
        }
    }
}

/// One transmission with its per-antenna images.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub images: Vec<RgbImage>,
}

/// Seed of task `(snr_index, class_index, index)` in `split`.
pub fn task_seed(master: u64, split: Split, snr_index: usize, class_index: usize, index: usize) -> u64 {
    seed::derive(
        master,
        &[split.seed_domain(), snr_index as u64, class_index as u64, index as u64],
    )
}

fn one_stream<R: Rng + ?Sized>(scheme: ModulationScheme, params: &SignalParams, rng: &mut R) -> Result<RealSignal> {
    let symbols = generate_symbols(scheme.order(), params.num_symbols, rng)?;
    if params.random_initial_phase {
        let params = SignalParams {
            initial_phase_rad: rng.gen_range(0.0..std::f64::consts::TAU),
            ..params.clone()
        };
        modulate(scheme, &symbols, &params)
    } else {
        modulate(scheme, &symbols, params)
    }
}

/// Received waveforms of one transmission of `scheme` at `snr_db`, all
/// randomness drawn from `seed`.
pub fn synthesize(
    scheme: ModulationScheme,
    params: &SignalParams,
    scenario: Scenario,
    snr_db: f64,
    seed_value: u64,
) -> Result<ReceivedBundle> {
    let mut rng = seed::rng(seed_value);
    let ts = params.symbol_period_s();
    let bundle = match scenario {
        Scenario::Siso => {
            let x = one_stream(scheme, params, &mut rng)?;
            let y = siso_transmit(&x, 1.0, ts, snr_db, &mut rng)?;
            ReceivedBundle {
                branches: vec![y],
                truth_label: None,
                snr_db,
            }
        }
        Scenario::Mimo { nt, nr } => {
            let streams = (0..nt)
                .map(|_| one_stream(scheme, params, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let ch = sample_channel(nt, nr, ts, &mut rng)?;
            mimo_transmit(&streams, &ch, snr_db, &mut rng)?
        }
    };
    Ok(bundle.labeled(scheme))
}

struct Task {
    snr_index: usize,
    class_index: usize,
    index: usize,
}

fn tasks(cfg: &ExperimentConfig) -> Vec<Task> {
    let k = cfg.classes().len();
    let n = cfg.signals_per_class_per_snr;
    let mut out = Vec::with_capacity(cfg.snr_list_db.len() * k * n);
    for snr_index in 0..cfg.snr_list_db.len() {
        for class_index in 0..k {
            for index in 0..n {
                out.push(Task {
                    snr_index,
                    class_index,
                    index,
                });
            }
        }
    }
    out
}

fn run_task(cfg: &ExperimentConfig, classes: &[ModulationScheme], split: Split, t: &Task) -> Result<Sample> {
    let snr_db = cfg.snr_list_db[t.snr_index];
    let seed_value = task_seed(cfg.master_seed, split, t.snr_index, t.class_index, t.index);
    let bundle = synthesize(classes[t.class_index], &cfg.signal, cfg.scenario, snr_db, seed_value)?;
    let images = bundle
        .branches
        .iter()
        .map(|y| cfg.image.render(y))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sample {
        label: t.class_index,
        snr_db,
        seed: seed_value,
        images,
    })
}

/// Generates the whole split in memory, ordered by SNR, then class, then
/// index. Work is spread over the rayon pool; the result does not depend on
/// the number of threads.
pub fn generate_samples(cfg: &ExperimentConfig, split: Split) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let classes = cfg.classes();
    tasks(cfg)
        .par_iter()
        .map(|t| run_task(cfg, &classes, split, t))
        .collect()
}

/// Flattens samples into a training set with one entry per antenna image.
pub fn to_dataset(samples: Vec<Sample>) -> Dataset<f32> {
    let mut data = Dataset::default();
    for s in samples {
        for img in &s.images {
            data.push(hwc_to_chw(img), s.label);
        }
    }
    data
}

/// One image file of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    /// Relative to the dataset directory.
    pub image_path: String,
    pub label: ModulationScheme,
    pub label_index: usize,
    pub snr_db: f64,
    pub scenario: String,
    pub antenna_index: usize,
    /// Position of the transmission in the split; images with the same
    /// value were received together.
    pub sample_index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub split: Split,
    pub scenario: Scenario,
    pub classes: Vec<ModulationScheme>,
    /// `[height, width, channels]`.
    pub image_shape: [usize; 3],
    pub records: Vec<ImageRecord>,
}

impl Manifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.clone(),
            offset: 0,
            message: format!("invalid manifest: {e}"),
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Fails unless the manifest was produced for the class set and
    /// scenario of `cfg`.
    pub fn check_compatible(&self, cfg: &ExperimentConfig) -> Result<()> {
        if self.classes != cfg.classes() {
            return Err(Error::data(format!(
                "dataset classes [{}] do not match the configured set [{}]",
                join(&self.classes),
                join(&cfg.classes())
            )));
        }
        if self.scenario != cfg.scenario {
            return Err(Error::data(format!(
                "dataset scenario {} does not match the configured {}",
                self.scenario, cfg.scenario
            )));
        }
        let (h, w, c) = cfg.image.shape();
        if self.image_shape != [h, w, c] {
            return Err(Error::data(format!(
                "dataset images are {:?}, config expects [{h}, {w}, {c}]",
                self.image_shape
            )));
        }
        Ok(())
    }
}

fn join(v: &[ModulationScheme]) -> String {
    v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
}

fn image_name(scheme: ModulationScheme, snr_db: f64, index: usize, antenna: usize) -> String {
    format!("{scheme}_{snr_db}dB_{index:05}_a{antenna}.tfa")
}

/// Generates `split` and writes one `TFA1` file per antenna image plus
/// `manifest.json` into `out_dir`. The manifest is written last.
pub fn generate_dataset(cfg: &ExperimentConfig, split: Split, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let classes = cfg.classes();
    let scenario = cfg.scenario.to_string();
    let records: Vec<Vec<ImageRecord>> = tasks(cfg)
        .par_iter()
        .enumerate()
        .map(|(sample_index, t)| {
            let sample = run_task(cfg, &classes, split, t)?;
            let scheme = classes[t.class_index];
            sample
                .images
                .iter()
                .enumerate()
                .map(|(antenna, img)| {
                    let name = image_name(scheme, sample.snr_db, t.index, antenna);
                    write_tfa(img, out_dir.join(&name))?;
                    Ok(ImageRecord {
                        image_path: name,
                        label: scheme,
                        label_index: t.class_index,
                        snr_db: sample.snr_db,
                        scenario: scenario.clone(),
                        antenna_index: antenna,
                        sample_index,
                        seed: sample.seed,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (h, w, c) = cfg.image.shape();
    let manifest = Manifest {
        split,
        scenario: cfg.scenario,
        classes,
        image_shape: [h, w, c],
        records: records.into_iter().flatten().collect(),
    };
    manifest.save(out_dir)?;
    log::info!(
        "wrote {} {split} images to {}",
        manifest.records.len(),
        out_dir.display()
    );
    Ok(manifest)
}

/// Reads every image of a dataset directory back into samples, grouping
/// images of one transmission by `sample_index` in antenna order.
pub fn load_samples(manifest: &Manifest, dir: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let dir = dir.as_ref();
    let k = manifest.classes.len();
    let [h, w, c] = manifest.image_shape;
    let images: Vec<RgbImage> = manifest
        .records
        .par_iter()
        .map(|r| {
            let path = dir.join(&r.image_path);
            let img = read_tfa(&path)?;
            if img.shape() != (h, w, c) {
                return Err(Error::data(format!(
                    "{}: image is {:?}, manifest says {:?}",
                    path.display(),
                    img.shape(),
                    manifest.image_shape
                )));
            }
            Ok(img)
        })
        .collect::<Result<_>>()?;

    let mut samples: Vec<Sample> = Vec::new();
    let mut current: Option<usize> = None;
    for (r, img) in manifest.records.iter().zip(images) {
        if r.label_index >= k || manifest.classes[r.label_index] != r.label {
            return Err(Error::data(format!(
                "{}: label {} / index {} inconsistent with the class list",
                r.image_path, r.label, r.label_index
            )));
        }
        if current == Some(r.sample_index) {
            let s = samples.last_mut().unwrap();
            if s.label != r.label_index || s.images.len() != r.antenna_index {
                return Err(Error::data(format!(
                    "{}: antenna records of sample {} are out of order or mislabeled",
                    r.image_path, r.sample_index
                )));
            }
            s.images.push(img);
        } else {
            if r.antenna_index != 0 {
                return Err(Error::data(format!(
                    "{}: sample {} does not start at antenna 0",
                    r.image_path, r.sample_index
                )));
            }
            current = Some(r.sample_index);
            samples.push(Sample {
                label: r.label_index,
                snr_db: r.snr_db,
                seed: r.seed,
                images: vec![img],
            });
        }
    }
    let nr = manifest.scenario.receive_antennas();
    if let Some(s) = samples.iter().find(|s| s.images.len() != nr) {
        return Err(Error::data(format!(
            "sample with seed {} has {} images, scenario needs {nr}",
            s.seed,
            s.images.len()
        )));
    }
    Ok(samples)
}
