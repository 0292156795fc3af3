use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssad::data::{
    save_annotations, save_predictions, save_sas_features, slide_windows, synth_split, write_atomic, ActionInstance,
    SasFeatureSequence, SynthDataset, Window, WindowConfig,
};
use ssad::evaluation::evaluate;
use ssad::inference::predict_all;
use ssad::model::{load_checkpoint, save_checkpoint, BaseLayers, Network, NetworkConfig};
use ssad::tensor::{grad_check, GradCheckConfig, Tensor};
use ssad::training::{prepare_windows, EpochRecord, LossObjective, Trainer};
use ssad::{Error, Result};

use crate::config::RunConfig;
use crate::dataset::{load_split, BlockSpec, Manifest, SplitSpec, MANIFEST_FILE};

pub const MODEL_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const PREDICTIONS_FILE: &str = "predictions.json";
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Usage(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn synth(config: &RunConfig, out: &Path) -> Result<()> {
    let gen = &config.synth.generator;
    let (train, test) = synth_split(gen, config.synth.num_train, config.synth.num_test, config.seed)?;
    if config.synth.num_train + config.synth.num_test == 0 {
        log::warn!("no videos requested; writing an empty dataset");
    }
    let classes = gen.num_classes + 1;
    let split_spec = |name: &str, ds: &SynthDataset| SplitSpec {
        annotations: format!("{name}.json"),
        videos: ds.annotations.videos.iter().map(|v| v.id.clone()).collect(),
    };
    let manifest = Manifest {
        version: 1,
        seed: config.seed,
        categories: gen.category_names(),
        blocks: gen
            .block_names
            .iter()
            .map(|name| BlockSpec {
                name: name.clone(),
                width: classes,
            })
            .collect(),
        class_map: (0..classes).map(Some).collect(),
        features_dir: "features".into(),
        splits: BTreeMap::from([
            ("train".to_string(), split_spec("train", &train)),
            ("test".to_string(), split_spec("test", &test)),
        ]),
    };
    let features = out.join(&manifest.features_dir);
    create_dir(&features)?;
    for seq in train.features.iter().chain(&test.features) {
        save_sas_features(&features.join(format!("{}.sasf", seq.video_id())), seq)?;
    }
    save_annotations(&out.join("train.json"), &train.annotations)?;
    save_annotations(&out.join("test.json"), &test.annotations)?;
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    println!(
        "wrote {} train and {} test videos to {}",
        train.features.len(),
        test.features.len(),
        out.display()
    );
    Ok(())
}

fn training_windows(features: &[SasFeatureSequence], instances: &[&[ActionInstance]], window_len: usize) -> Result<Vec<Window>> {
    let cfg = WindowConfig::training(window_len);
    let mut windows = Vec::new();
    for (seq, inst) in features.iter().zip(instances) {
        windows.extend(slide_windows(seq, inst, &cfg)?);
    }
    Ok(windows)
}

fn check_network_fits(net: &NetworkConfig, input_dim: usize, num_classes: usize) -> Result<()> {
    if net.input_dim != input_dim || net.num_classes != num_classes {
        return Err(Error::Usage(format!(
            "checkpoint expects input dimension {} and {} classes, dataset has {input_dim} and {num_classes}",
            net.input_dim, net.num_classes
        )));
    }
    Ok(())
}

pub fn train(config: &RunConfig, data: &Path, out: &Path, resume: Option<&Path>) -> Result<()> {
    let split = load_split(data, "train")?;
    let dim = split.manifest.input_dim();
    let classes = split.manifest.num_classes();
    let network = match resume {
        Some(path) => {
            let net = load_checkpoint(path)?;
            check_network_fits(net.config(), dim, classes)?;
            log::info!("resuming from {} with fresh optimizer state", path.display());
            net
        }
        None => Network::build(config.network_config(dim, classes)?, config.seed)?,
    };
    let instances: Vec<&[ActionInstance]> = split.annotations.videos.iter().map(|v| v.instances.as_slice()).collect();
    let windows = training_windows(&split.features, &instances, network.config().window_len)?;
    let prepared = prepare_windows(&network, windows)?;
    log::info!(
        "{} training windows, {} parameters",
        prepared.len(),
        network.num_parameters()
    );
    let mut trainer = Trainer::new(network, prepared, config.train_config())?;

    create_dir(out)?;
    write_json(&out.join("run_config.json"), config)?;
    let mut log_text = String::new();
    let every = config.train.checkpoint_every;
    let result = trainer.train(|record: &EpochRecord, net: &Network| {
        log_text.push_str(&serde_json::to_string(record).map_err(|e| Error::Usage(e.to_string()))?);
        log_text.push('\n');
        write_atomic(&out.join(TRAIN_LOG_FILE), log_text.as_bytes())?;
        if every > 0 && record.epoch.is_multiple_of(every) {
            save_checkpoint(&out.join(format!("checkpoint_epoch_{:03}.ckpt", record.epoch)), net)?;
        }
        println!(
            "epoch {:>3}  loss {:.5}  class {:.5}  over {:.5}  loc {:.5}  l2 {:.5}",
            record.epoch, record.mean_loss, record.class_loss, record.over_loss, record.loc_loss, record.l2
        );
        Ok(())
    });
    match result {
        Ok(_) => {
            save_checkpoint(&out.join(MODEL_FILE), trainer.network())?;
            println!("saved {}", out.join(MODEL_FILE).display());
            Ok(())
        }
        Err(e @ Error::Numeric(_)) => {
            save_checkpoint(&out.join(MODEL_FILE), trainer.last_good())?;
            log::error!("kept the last good parameters in {}", out.join(MODEL_FILE).display());
            Err(e)
        }
        Err(e) => Err(e),
    }
}

pub fn predict(config: &RunConfig, data: &Path, checkpoint: &Path, out: &Path) -> Result<()> {
    let fusion = config.fusion()?;
    let split = load_split(data, &config.predict.split)?;
    let network = load_checkpoint(checkpoint)?;
    check_network_fits(network.config(), split.manifest.input_dim(), split.manifest.num_classes())?;
    let map = split.manifest.class_map();
    let detections = predict_all(&split.features, &network, &fusion, Some(&map))?;
    create_dir(out)?;
    save_predictions(&out.join(PREDICTIONS_FILE), &detections)?;
    println!(
        "{} detections over {} videos written to {}",
        detections.len(),
        split.features.len(),
        out.join(PREDICTIONS_FILE).display()
    );
    Ok(())
}

pub fn eval(config: &RunConfig, predictions: &Path, annotations: &Path, out: &Path) -> Result<()> {
    let thresholds = config.thresholds()?;
    let mode = config.interpolation()?;
    let detections = ssad::data::load_predictions(predictions)?;
    let ann = ssad::data::load_annotations(annotations)?;
    let report = evaluate(&detections, &ann, &thresholds, mode)?;
    let label = predictions
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "predictions".into());
    let table = report.to_table(&label);
    create_dir(out)?;
    write_json(&out.join("report.json"), &report)?;
    write_atomic(&out.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

/// A small network and one random window with planted instances.
fn gradcheck_problem(config: &RunConfig) -> Result<(Network, Vec<Window>)> {
    let seed = config.seed;
    let classes = 4;
    let dim = 6;
    let mut net_cfg = NetworkConfig::new(dim, classes);
    net_cfg.window_len = 128;
    net_cfg.base = BaseLayers::Preset(config.arch()?);
    net_cfg.base_filters = 4;
    net_cfg.anchor_filters = 5;
    let mut network = Network::build(net_cfg, seed)?;
    network.jitter_biases(0.1, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let data: Vec<f64> = (0..128 * dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let window = Window {
        video_id: "gradcheck".into(),
        start: 0,
        window_len: 128,
        features: Tensor::matrix(128, dim, data)?,
        ground_truth: vec![
            ActionInstance {
                start: 0.1,
                end: 0.45,
                category: 1,
            },
            ActionInstance {
                start: 0.55,
                end: 0.95,
                category: 1 + rng.gen_range(0..classes - 1),
            },
        ],
    };
    Ok((network, vec![window]))
}

pub fn gradcheck(config: &RunConfig, entries: Option<usize>, out: Option<&Path>) -> Result<()> {
    let started = Instant::now();
    let (network, windows) = gradcheck_problem(config)?;
    let prepared = prepare_windows(&network, windows)?;
    let weights = config.train_config().weights;
    let mut objective = LossObjective::new(network, prepared, weights, config.seed)?;
    let report = grad_check(
        &mut objective,
        &GradCheckConfig {
            max_entries_per_parameter: entries,
            seed: config.seed,
            ..GradCheckConfig::default()
        },
    )?;
    let passed = report.passes(GRADCHECK_TOLERANCE);
    let summary = serde_json::json!({
        "max_relative_error": report.max_error,
        "worst_parameter": report.worst_parameter,
        "worst_index": report.worst_index,
        "entries_checked": report.entries_checked,
        "tolerance": GRADCHECK_TOLERANCE,
        "passed": passed,
    });
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("gradcheck.json"), &summary)?;
    }
    println!(
        "gradient check: max relative error {:.3e} at {}[{}] over {} entries in {:.1}s: {}",
        report.max_error,
        report.worst_parameter,
        report.worst_index,
        report.entries_checked,
        started.elapsed().as_secs_f64(),
        if passed { "PASS" } else { "FAIL" }
    );
    if passed {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "gradient check error {:.3e} is not below {GRADCHECK_TOLERANCE:e}",
            report.max_error
        )))
    }
}
