//! Run configuration: defaults, then a flat JSON file with dotted keys, then
//! command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use ssad::data::SynthConfig;
use ssad::evaluation::{parse_thresholds, Interpolation};
use ssad::inference::FusionConfig;
use ssad::model::{BaseArch, BaseLayers, NetworkConfig};
use ssad::training::{LossWeights, TrainConfig};
use ssad::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SynthSection,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub predict: PredictSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSection {
    pub num_train: usize,
    pub num_test: usize,
    pub generator: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSection {
    pub arch: String,
    pub window_len: usize,
    pub base_filters: usize,
    pub anchor_filters: usize,
    pub anchor_kernel: usize,
    pub prediction_kernel: usize,
    pub ratios: Vec<Vec<f64>>,
    pub alpha_center: f64,
    pub alpha_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub negative_ratio: f64,
    /// Write an extra checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSection {
    pub split: String,
    pub fusion: String,
    pub nms_threshold: f64,
    pub background_suppression: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    pub thresholds: String,
    pub interpolation: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let net = NetworkConfig::new(1, 2);
        let train = TrainConfig::default();
        let fusion = FusionConfig::default();
        Self {
            seed: 7,
            synth: SynthSection {
                num_train: 50,
                num_test: 20,
                generator: SynthConfig::default(),
            },
            network: NetworkSection {
                arch: "B".into(),
                window_len: net.window_len,
                base_filters: net.base_filters,
                anchor_filters: net.anchor_filters,
                anchor_kernel: net.anchor_kernel,
                prediction_kernel: net.prediction_kernel,
                ratios: net.ratios,
                alpha_center: net.alpha_center,
                alpha_width: net.alpha_width,
            },
            train: TrainSection {
                epochs: train.epochs,
                lr: train.learning_rate,
                batch_size: train.batch_size,
                alpha: train.weights.alpha,
                beta: train.weights.beta,
                lambda: train.weights.lambda,
                negative_ratio: train.negative_ratio,
                checkpoint_every: 0,
            },
            predict: PredictSection {
                split: "test".into(),
                fusion: "class,sas,over".into(),
                nms_threshold: fusion.nms_threshold,
                background_suppression: fusion.background_suppression,
            },
            eval: EvalSection {
                thresholds: "0.1:0.5:0.1".into(),
                interpolation: "allpoint".into(),
            },
        }
    }
}

/// Sets a dotted key inside a nested JSON object. Only keys that already
/// exist in the defaults are accepted.
fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("config key '{key}' is not a section")))?;
        let slot = obj
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        if i + 1 == parts.len() {
            if slot.is_object() {
                return Err(Error::Config(format!("config key '{key}' names a section, not a value")));
            }
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    unreachable!("split yields at least one part")
}

impl RunConfig {
    /// Merges `file` (if any) and then `overrides` over the defaults.
    pub fn load(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut root = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            let flat: Map<String, Value> = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("config {} is not a flat JSON object: {e}", path.display())))?;
            for (key, value) in flat {
                set_dotted(&mut root, &key, value)?;
            }
        }
        for (key, value) in overrides {
            set_dotted(&mut root, key, value.clone())?;
        }
        let config: RunConfig =
            serde_json::from_value(root).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.arch()?;
        self.train_config().validate()?;
        self.fusion()?.validate()?;
        self.thresholds()?;
        self.interpolation()?;
        Ok(())
    }

    pub fn arch(&self) -> Result<BaseArch> {
        self.network.arch.parse()
    }

    pub fn network_config(&self, input_dim: usize, num_classes: usize) -> Result<NetworkConfig> {
        let n = &self.network;
        let cfg = NetworkConfig {
            window_len: n.window_len,
            input_dim,
            base: BaseLayers::Preset(self.arch()?),
            base_filters: n.base_filters,
            anchor_filters: n.anchor_filters,
            anchor_kernel: n.anchor_kernel,
            prediction_kernel: n.prediction_kernel,
            ratios: n.ratios.clone(),
            num_classes,
            alpha_center: n.alpha_center,
            alpha_width: n.alpha_width,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            learning_rate: t.lr,
            batch_size: t.batch_size,
            seed: self.seed,
            weights: LossWeights {
                alpha: t.alpha,
                beta: t.beta,
                lambda: t.lambda,
            },
            negative_ratio: t.negative_ratio,
        }
    }

    pub fn fusion(&self) -> Result<FusionConfig> {
        let mut cfg = FusionConfig {
            use_class: false,
            use_sas: false,
            use_over: false,
            nms_threshold: self.predict.nms_threshold,
            background_suppression: self.predict.background_suppression,
        };
        for part in self.predict.fusion.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "class" => cfg.use_class = true,
                "sas" => cfg.use_sas = true,
                "over" => cfg.use_over = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown fusion term '{other}', expected class, sas or over"
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn thresholds(&self) -> Result<Vec<f64>> {
        parse_thresholds(&self.eval.thresholds)
    }

    pub fn interpolation(&self) -> Result<Interpolation> {
        self.eval.interpolation.parse()
    }
}
