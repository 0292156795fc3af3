mod commands;
mod config;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use ssad::{Error, Result};

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "ssad", version, about = "Temporal action detection on snippet-level action scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat JSON file with dotted keys, e.g. {"train.lr": 0.001}
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted action instances
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        num_train: Option<usize>,
        #[arg(long)]
        num_test: Option<usize>,
    },
    /// Train a detector on the train split of a dataset
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Base-layer preset, A to E
        #[arg(long)]
        arch: Option<String>,
        /// Continue from a checkpoint (optimizer state starts fresh)
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
    },
    /// Detect actions in every video of a split
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        split: Option<String>,
        /// Comma set of score terms: class, sas, over
        #[arg(long)]
        fusion: Option<String>,
        #[arg(long)]
        nms_threshold: Option<f64>,
    },
    /// Score predictions against annotations
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        predictions: PathBuf,
        /// Annotation file; defaults to the split's file inside --data
        #[arg(long, value_name = "PATH")]
        annotations: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        #[arg(long)]
        split: Option<String>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// start:end:step or a comma list
        #[arg(long)]
        thresholds: Option<String>,
        /// allpoint or 11point
        #[arg(long)]
        interpolation: Option<String>,
    },
    /// Compare analytic and finite-difference gradients of the training loss
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        arch: Option<String>,
        /// Check only this many random entries per parameter
        #[arg(long)]
        entries: Option<usize>,
    },
}

fn overrides(common: &Common, extra: Vec<(&str, Option<Value>)>) -> Vec<(String, Value)> {
    let mut out: Vec<(String, Value)> = Vec::new();
    if let Some(seed) = common.seed {
        out.push(("seed".into(), json!(seed)));
    }
    out.extend(extra.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    out
}

fn load(common: &Common, extra: Vec<(&str, Option<Value>)>) -> Result<RunConfig> {
    RunConfig::load(common.config.as_deref(), &overrides(common, extra))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            common,
            out,
            num_train,
            num_test,
        } => {
            let cfg = load(
                &common,
                vec![
                    ("synth.num_train", num_train.map(|v| json!(v))),
                    ("synth.num_test", num_test.map(|v| json!(v))),
                ],
            )?;
            commands::synth(&cfg, &out)
        }
        Command::Train {
            common,
            data,
            out,
            epochs,
            lr,
            batch_size,
            arch,
            resume,
        } => {
            let cfg = load(
                &common,
                vec![
                    ("train.epochs", epochs.map(|v| json!(v))),
                    ("train.lr", lr.map(|v| json!(v))),
                    ("train.batch_size", batch_size.map(|v| json!(v))),
                    ("network.arch", arch.map(|v| json!(v))),
                ],
            )?;
            commands::train(&cfg, &data, &out, resume.as_deref())
        }
        Command::Predict {
            common,
            data,
            checkpoint,
            out,
            split,
            fusion,
            nms_threshold,
        } => {
            let cfg = load(
                &common,
                vec![
                    ("predict.split", split.map(|v| json!(v))),
                    ("predict.fusion", fusion.map(|v| json!(v))),
                    ("predict.nms_threshold", nms_threshold.map(|v| json!(v))),
                ],
            )?;
            commands::predict(&cfg, &data, &checkpoint, &out)
        }
        Command::Eval {
            common,
            predictions,
            annotations,
            data,
            split,
            out,
            thresholds,
            interpolation,
        } => {
            let cfg = load(
                &common,
                vec![
                    ("predict.split", split.map(|v| json!(v))),
                    ("eval.thresholds", thresholds.map(|v| json!(v))),
                    ("eval.interpolation", interpolation.map(|v| json!(v))),
                ],
            )?;
            let annotations = match (annotations, data) {
                (Some(path), _) => path,
                (None, Some(dir)) => {
                    let manifest = dataset::load_manifest(&dir)?;
                    let spec = manifest.splits.get(&cfg.predict.split).ok_or_else(|| {
                        Error::Usage(format!("dataset has no split '{}'", cfg.predict.split))
                    })?;
                    dir.join(&spec.annotations)
                }
                (None, None) => return Err(Error::Usage("eval needs --annotations or --data".into())),
            };
            commands::eval(&cfg, &predictions, &annotations, &out)
        }
        Command::Gradcheck {
            common,
            out,
            arch,
            entries,
        } => {
            let cfg = load(&common, vec![("network.arch", arch.map(|v| json!(v)))])?;
            commands::gradcheck(&cfg, entries, out.as_deref())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Usage(_) => 1,
        Error::Load { .. } | Error::Io(_) | Error::Evaluation(_) | Error::Generation(_) => 2,
        Error::Numeric(_) => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
