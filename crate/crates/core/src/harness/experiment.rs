//! Training and evaluation drivers, from dataset directories or fully in
//! memory.

use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::dataset::{generate_samples, load_samples, to_dataset, Manifest, Sample, Split};
use super::metrics::{evaluate, EvalMetrics};
use crate::cnn::{load_model, save_model, train, CnnModel, Dataset, History, TrainConfig};
use crate::error::{Error, Result};
use crate::seed;

const INIT_STREAM: u64 = 0x1417;
const TRAIN_STREAM: u64 = 0x7EA1;

/// Builds a fresh network for `cfg` and trains it on `data`. Initial weights
/// and the training order derive from `cfg.master_seed` and `cfg.train.seed`.
pub fn train_model(cfg: &ExperimentConfig, data: &Dataset<f32>) -> Result<(CnnModel<f32>, History)> {
    let k = cfg.classes().len();
    let init = seed::derive(cfg.master_seed, &[INIT_STREAM, cfg.train.seed]);
    let mut model = CnnModel::<f32>::build_with_dropout(cfg.input_shape(), k, init, cfg.train.dropout_rate as f32)?;
    let train_cfg = TrainConfig {
        seed: seed::derive(cfg.master_seed, &[TRAIN_STREAM, cfg.train.seed]),
        ..cfg.train.clone()
    };
    log::info!(
        "training {} parameters on {} images, {} epochs",
        model.num_params(),
        data.len(),
        train_cfg.epochs
    );
    let history = train(&mut model, data, &train_cfg)?;
    Ok((model, history))
}

/// `<model>.history.csv` next to the model file.
pub fn history_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("history.csv")
}

fn load_split(cfg: &ExperimentConfig, dir: &Path, split: Split) -> Result<Vec<Sample>> {
    let manifest = Manifest::load(dir)?;
    manifest.check_compatible(cfg)?;
    if manifest.split != split {
        log::warn!("{} holds the {} split, used here for {split}", dir.display(), manifest.split);
    }
    load_samples(&manifest, dir)
}

/// Trains on the dataset directory `data_dir` and writes the model and its
/// per-epoch history.
pub fn run_training(
    cfg: &ExperimentConfig,
    data_dir: impl AsRef<Path>,
    model_path: impl AsRef<Path>,
) -> Result<(CnnModel<f32>, History)> {
    cfg.validate()?;
    let model_path = model_path.as_ref();
    let data = to_dataset(load_split(cfg, data_dir.as_ref(), Split::Train)?);
    let (model, history) = train_model(cfg, &data)?;
    save_model(&model, model_path)?;
    history.write_csv(history_path(model_path))?;
    Ok((model, history))
}

/// Evaluates a saved model on the dataset directory `data_dir`.
pub fn run_evaluation(
    cfg: &ExperimentConfig,
    data_dir: impl AsRef<Path>,
    model_path: impl AsRef<Path>,
) -> Result<EvalMetrics> {
    cfg.validate()?;
    let model = load_model(model_path.as_ref())?;
    if model.input_shape() != cfg.input_shape() {
        return Err(Error::data(format!(
            "model input {:?} does not match configured images {:?}",
            model.input_shape(),
            cfg.input_shape()
        )));
    }
    let samples = load_split(cfg, data_dir.as_ref(), Split::Test)?;
    evaluate(cfg, &model, &samples)
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub model: CnnModel<f32>,
    pub history: History,
    pub metrics: EvalMetrics,
}

/// Generate, train and evaluate without touching the disk.
pub fn run_in_memory(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let data = to_dataset(generate_samples(cfg, Split::Train)?);
    let (model, history) = train_model(cfg, &data)?;
    drop(data);
    let test = generate_samples(cfg, Split::Test)?;
    let metrics = evaluate(cfg, &model, &test)?;
    Ok(Outcome {
        model,
        history,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ModulationSet;
    use crate::harness::dataset::generate_dataset;
    use crate::tfa::ImageConfig;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            modulation_set: ModulationSet::Custom(vec!["2fsk".parse().unwrap(), "4fsk".parse().unwrap()]),
            snr_list_db: vec![10.0],
            signals_per_class_per_snr: 4,
            image: ImageConfig {
                target: 32,
                ..Default::default()
            },
            train: TrainConfig {
                epochs: 2,
                batch_size: 4,
                ..Default::default()
            },
            master_seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn directory_and_memory_paths_agree() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        let (train_dir, test_dir) = (dir.path().join("train"), dir.path().join("test"));
        generate_dataset(&cfg, Split::Train, &train_dir).unwrap();
        generate_dataset(&cfg, Split::Test, &test_dir).unwrap();
        let model_path = dir.path().join("m.cnn1");
        let (model, history) = run_training(&cfg, &train_dir, &model_path).unwrap();
        assert!(history_path(&model_path).exists());
        let metrics = run_evaluation(&cfg, &test_dir, &model_path).unwrap();

        let mem = run_in_memory(&cfg).unwrap();
        assert_eq!(mem.model, model);
        assert_eq!(format!("{:?}", mem.history), format!("{history:?}"));
        assert_eq!(mem.metrics, metrics);
    }

    #[test]
    fn missing_image_names_the_file() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, Split::Train, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join(&m.records[3].image_path)).unwrap();
        let err = run_training(&cfg, dir.path(), dir.path().join("m.cnn1")).unwrap_err();
        assert!(err.to_string().contains(&m.records[3].image_path), "{err}");
        assert!(!dir.path().join("m.cnn1").exists());
    }

    #[test]
    fn class_mismatch_between_model_and_config() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        generate_dataset(&cfg, Split::Test, dir.path()).unwrap();
        let model = CnnModel::<f32>::build(cfg.input_shape(), 3, 0).unwrap();
        save_model(&model, dir.path().join("m.cnn1")).unwrap();
        assert!(matches!(
            run_evaluation(&cfg, dir.path(), dir.path().join("m.cnn1")),
            Err(Error::Data(_))
        ));
    }
}
