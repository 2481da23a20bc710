use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scenario};
use super::dataset::Sample;
use crate::cnn::{CnnModel, DecisionVector, Mode};
use crate::error::{Error, Result};
use crate::fusion::{fuse_decisions, FusionRule};
use crate::seed;
use crate::sigsynth::ModulationScheme;
use crate::tfa::RgbImage;

/// Anything that maps images to class-probability vectors.
pub trait Predictor: Sync {
    fn num_classes(&self) -> usize;
    fn predict(&self, images: &[&RgbImage]) -> Result<Vec<DecisionVector>>;
}

impl Predictor for CnnModel<f32> {
    fn num_classes(&self) -> usize {
        CnnModel::num_classes(self)
    }

    fn predict(&self, images: &[&RgbImage]) -> Result<Vec<DecisionVector>> {
        let mut out = Vec::with_capacity(images.len());
        for batch in images.chunks(256) {
            let inputs = batch
                .iter()
                .map(|img| self.image_to_input(img))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&[f32]> = inputs.iter().map(Vec::as_slice).collect();
            for probs in CnnModel::predict(self, &refs, Mode::Eval)? {
                let probs: Vec<f64> = probs.into_iter().map(f64::from).collect();
                if probs.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Numeric("non-finite class probability".into()));
                }
                out.push(DecisionVector::new(probs)?);
            }
        }
        Ok(out)
    }
}

/// Confusion counts, rows indexed by the true class. Undecided fusion
/// outcomes are kept in a separate column and count as errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub num_classes: usize,
    /// Row-major `truth × predicted`.
    pub counts: Vec<u64>,
    pub undecided: Vec<u64>,
}

impl Confusion {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
            undecided: vec![0; num_classes],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: Option<usize>) {
        match predicted {
            Some(p) => self.counts[truth * self.num_classes + p] += 1,
            None => self.undecided[truth] += 1,
        }
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        let k = self.num_classes;
        self.counts[truth * k..(truth + 1) * k].iter().sum::<u64>() + self.undecided[truth]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.undecided.iter().sum::<u64>()
    }

    pub fn correct(&self) -> u64 {
        (0..self.num_classes).map(|k| self.count(k, k)).sum()
    }

    /// NaN when empty.
    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn class_accuracy(&self, truth: usize) -> f64 {
        self.count(truth, truth) as f64 / self.row_total(truth) as f64
    }

    /// Each row divided by its total (undecided included); empty rows stay 0.
    pub fn row_normalized(&self) -> Vec<f64> {
        let k = self.num_classes;
        let mut out = vec![0.0; k * k];
        for t in 0..k {
            let n = self.row_total(t);
            if n > 0 {
                for p in 0..k {
                    out[t * k + p] = self.count(t, p) as f64 / n as f64;
                }
            }
        }
        out
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.undecided.iter_mut().zip(&other.undecided).for_each(|(a, b)| *a += b);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrMetrics {
    pub snr_db: f64,
    pub samples: usize,
    /// Mean per-antenna accuracy (the single-antenna accuracy for SISO).
    pub acc_no_fusion: f64,
    /// Accuracy of the final decision.
    pub acc_fused: f64,
    /// Final decisions.
    pub confusion: Confusion,
    /// Every antenna's own decision.
    pub antenna_confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub scenario: Scenario,
    /// `theta1`, `theta2` or `customK`.
    pub set_tag: String,
    pub classes: Vec<ModulationScheme>,
    pub fusion: FusionRule,
    /// Ascending SNR.
    pub per_snr: Vec<SnrMetrics>,
}

impl EvalMetrics {
    /// `<scenario>_<set>`.
    pub fn tag(&self) -> String {
        format!("{}_{}", self.scenario, self.set_tag)
    }

    pub fn at_snr(&self, snr_db: f64) -> Option<&SnrMetrics> {
        self.per_snr.iter().find(|m| m.snr_db == snr_db)
    }

    pub fn confusion(&self) -> Confusion {
        let mut c = Confusion::new(self.classes.len());
        self.per_snr.iter().for_each(|m| c.merge(&m.confusion));
        c
    }

    pub fn overall_accuracy(&self) -> f64 {
        self.confusion().accuracy()
    }

    pub fn overall_no_fusion(&self) -> f64 {
        let mut c = Confusion::new(self.classes.len());
        self.per_snr.iter().for_each(|m| c.merge(&m.antenna_confusion));
        c.accuracy()
    }
}

const FUSION_STREAM: u64 = 0xF0_5E;

/// Scores `samples` with `predictor` and fuses per-antenna decisions with
/// `cfg.fusion`. Tie-breaking draws are seeded from each sample's seed.
pub fn evaluate(cfg: &ExperimentConfig, predictor: &dyn Predictor, samples: &[Sample]) -> Result<EvalMetrics> {
    let classes = cfg.classes();
    let k = classes.len();
    if predictor.num_classes() != k {
        return Err(Error::data(format!(
            "model predicts {} classes but the configured set has {k}",
            predictor.num_classes()
        )));
    }
    if samples.is_empty() {
        return Err(Error::data("no samples to evaluate"));
    }
    let nr = cfg.scenario.receive_antennas();
    if let Some(s) = samples.iter().find(|s| s.images.len() != nr || s.label >= k) {
        return Err(Error::data(format!(
            "sample with seed {} has {} images and label {}; expected {nr} images and label < {k}",
            s.seed,
            s.images.len(),
            s.label
        )));
    }
    let images: Vec<&RgbImage> = samples.iter().flat_map(|s| s.images.iter()).collect();
    let decisions = predictor.predict(&images)?;
    if decisions.len() != images.len() || decisions.iter().any(|d| d.len() != k) {
        return Err(Error::data("predictor returned the wrong number of decisions"));
    }

    let outcomes = samples
        .par_iter()
        .zip(decisions.par_chunks(nr))
        .map(|(s, d)| {
            let mut rng = seed::derived_rng(s.seed, &[cfg.master_seed, FUSION_STREAM]);
            fuse_decisions(d, cfg.fusion, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut snrs: Vec<f64> = samples.iter().map(|s| s.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let mut per_snr: Vec<SnrMetrics> = snrs
        .iter()
        .map(|&snr_db| SnrMetrics {
            snr_db,
            samples: 0,
            acc_no_fusion: 0.0,
            acc_fused: 0.0,
            confusion: Confusion::new(k),
            antenna_confusion: Confusion::new(k),
        })
        .collect();
    for (s, o) in samples.iter().zip(&outcomes) {
        let m = per_snr.iter_mut().find(|m| m.snr_db == s.snr_db).unwrap();
        m.samples += 1;
        m.confusion.record(s.label, o.final_label);
        for &l in &o.per_antenna_labels {
            m.antenna_confusion.record(s.label, Some(l));
        }
    }
    for m in &mut per_snr {
        m.acc_fused = m.confusion.accuracy();
        m.acc_no_fusion = m.antenna_confusion.accuracy();
    }
    Ok(EvalMetrics {
        scenario: cfg.scenario,
        set_tag: cfg.modulation_set.tag(),
        classes,
        fusion: cfg.fusion,
        per_snr,
    })
}
