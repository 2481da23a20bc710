//! `modclass` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or file
//! error, 3 numeric failure. `MODCLASS_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use modclass::fusion::{fuse, FusionRule};
use modclass::harness::{
    export_report, generate_dataset, history_path, read_waveform, run_evaluation, run_training, synthesize,
    write_waveform, ExperimentConfig, Scenario, Split, WaveformMeta,
};
use modclass::sigsynth::ModulationScheme;
use modclass::tfa::{write_png, write_tfa, ColorMode, FitMode, ImageConfig};
use modclass::{seed, Error, Result};

#[derive(Parser)]
#[command(name = "modclass", version, about = "Spectrogram-based modulation classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fit {
    Resize,
    CropPad,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one received waveform as raw little-endian f32.
    Synth {
        #[arg(long)]
        scheme: ModulationScheme,
        /// Omit for a noiseless waveform.
        #[arg(long, allow_negative_numbers = true)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Experiment config supplying signal parameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render a waveform file to a spectrogram image.
    Spectrogram {
        #[arg(long = "in")]
        input: PathBuf,
        /// 8-bit PNG for viewing.
        #[arg(long)]
        out: Option<PathBuf>,
        /// TFA1 float tensor, as used in datasets.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        target: usize,
        #[arg(long, value_enum, default_value_t = Fit::Resize)]
        fit: Fit,
        #[arg(long)]
        gray: bool,
        /// Experiment config supplying STFT and image settings (overrides
        /// the flags above).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Generate a train or test split into a directory.
    Dataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        split: Split,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a classifier on a dataset directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Evaluate a model on a dataset directory and write a report.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Fuse a comma-separated list of per-antenna labels.
    FuseDemo {
        #[arg(long, value_delimiter = ',')]
        labels: Vec<ModulationScheme>,
        /// `majority`, `soft-average` or `N-out-of`.
        #[arg(long, default_value = "majority")]
        rule: FusionRule,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            scheme,
            snr,
            seed,
            out,
            config,
        } => {
            let cfg = match config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            cfg.signal.validate_for(scheme)?;
            let bundle = synthesize(scheme, &cfg.signal, Scenario::Siso, snr.unwrap_or(f64::INFINITY), seed)?;
            let y = &bundle.branches[0];
            let meta = WaveformMeta {
                sample_rate_hz: y.sample_rate_hz,
                num_samples: y.len(),
                scheme: Some(scheme),
                seed: Some(seed),
                snr_db: snr,
            };
            write_waveform(y, &meta, &out)?;
            println!("{} samples of {scheme} -> {}", y.len(), out.display());
        }
        Command::Spectrogram {
            input,
            out,
            raw,
            target,
            fit,
            gray,
            config,
        } => {
            if out.is_none() && raw.is_none() {
                return Err(Error::Config("give --out and/or --raw".into()));
            }
            let image_cfg = match config {
                Some(p) => ExperimentConfig::load(p)?.image,
                None => ImageConfig {
                    target,
                    fit: match fit {
                        Fit::Resize => FitMode::Resize,
                        Fit::CropPad => FitMode::CropPad,
                    },
                    color: if gray { ColorMode::Gray } else { ColorMode::Jet },
                    ..ImageConfig::default()
                },
            };
            let (y, _) = read_waveform(&input)?;
            let img = image_cfg.render(&y)?;
            if let Some(p) = out {
                write_png(&img, &p)?;
                println!("wrote {}", p.display());
            }
            if let Some(p) = raw {
                write_tfa(&img, &p)?;
                println!("wrote {}", p.display());
            }
        }
        Command::Dataset { config, split, out_dir } => {
            let cfg = ExperimentConfig::load(config)?;
            let m = generate_dataset(&cfg, split, &out_dir)?;
            println!("{} {split} images -> {}", m.records.len(), out_dir.display());
        }
        Command::Train { config, data, model } => {
            let cfg = ExperimentConfig::load(config)?;
            let (_, history) = run_training(&cfg, &data, &model)?;
            if let Some(last) = history.epochs.last() {
                println!(
                    "epoch {}: train loss {:.4}, val acc {:.4}",
                    last.epoch, last.train_loss, last.val_acc
                );
            }
            println!("model -> {}", model.display());
            println!("history -> {}", history_path(&model).display());
        }
        Command::Eval {
            config,
            data,
            model,
            report,
        } => {
            let cfg = ExperimentConfig::load(config)?;
            let metrics = run_evaluation(&cfg, &data, &model)?;
            println!("{:>8} {:>14} {:>10}", "snr_db", "acc_no_fusion", "acc_fused");
            for s in &metrics.per_snr {
                println!("{:>8} {:>14.4} {:>10.4}", s.snr_db, s.acc_no_fusion, s.acc_fused);
            }
            println!("overall accuracy {:.4}", metrics.overall_accuracy());
            for p in export_report(&metrics, &report)? {
                println!("wrote {}", p.display());
            }
        }
        Command::FuseDemo { labels, rule, seed } => {
            let out = fuse(&labels, rule, &mut seed::rng(seed))?;
            let names: Vec<String> = out.per_antenna_labels.iter().map(|l| l.to_string()).collect();
            println!("labels:  {}", names.join(", "));
            println!("rule:    {rule}");
            match out.final_label {
                Some(l) => println!("decision: {l}{}", if out.tie_broken { " (tie broken at random)" } else { "" }),
                None => println!("decision: undecided"),
            }
        }
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("MODCLASS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("MODCLASS_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match configure_threads().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
