//! Experiment tooling: configuration, dataset generation, training and
//! evaluation drivers, reports and waveform files.

mod config;
mod dataset;
mod experiment;
mod metrics;
mod report;
mod waveform;

pub use config::{ExperimentConfig, ModulationSet, Scenario};
pub use dataset::{
    generate_dataset, generate_samples, load_samples, synthesize, task_seed, to_dataset, ImageRecord, Manifest,
    Sample, Split, MANIFEST_FILE,
};
pub use experiment::{history_path, run_evaluation, run_in_memory, run_training, train_model, Outcome};
pub use metrics::{evaluate, Confusion, EvalMetrics, Predictor, SnrMetrics};
pub use report::{export_report, read_accuracy_csv, AccuracyRow};
pub use waveform::{read_waveform, sidecar_path, write_waveform, WaveformMeta, DEFAULT_SAMPLE_RATE_HZ};
