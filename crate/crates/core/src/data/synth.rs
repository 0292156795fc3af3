//! Seeded synthetic videos with planted action instances.
//!
//! Every block mimics one upstream classifier over `K + 1` classes (column 0
//! is background). Inside a planted instance of category `k` each block puts a
//! score near `score_level` on column `k`; elsewhere the peak sits on the
//! background column. Gaussian noise is added and rows are clipped to `[0, 1]`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ActionInstance, AnnotationSet, SasFeatureSequence, VideoAnnotation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_videos: usize,
    pub num_classes: usize,
    pub block_names: Vec<String>,
    pub min_snippets: usize,
    pub max_snippets: usize,
    pub min_instances: usize,
    pub max_instances: usize,
    pub min_instance_len: usize,
    pub max_instance_len: usize,
    /// Minimum background gap between consecutive instances.
    pub min_gap: usize,
    pub noise_sigma: f64,
    pub score_level: f64,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_videos: 50,
            num_classes: 3,
            block_names: vec!["spatial".into(), "temporal".into(), "c3d".into()],
            min_snippets: 512,
            max_snippets: 768,
            min_instances: 1,
            max_instances: 3,
            min_instance_len: 40,
            max_instance_len: 160,
            min_gap: 16,
            noise_sigma: 0.1,
            score_level: 0.8,
            id_prefix: "video".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub features: Vec<SasFeatureSequence>,
    pub annotations: AnnotationSet,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Generation(msg));
        if self.num_classes == 0 {
            return bad("need at least one action category".into());
        }
        if self.block_names.is_empty() {
            return bad("need at least one score block".into());
        }
        if self.min_snippets == 0 || self.min_snippets > self.max_snippets {
            return bad(format!(
                "invalid video length range {}..={}",
                self.min_snippets, self.max_snippets
            ));
        }
        if self.min_instances > self.max_instances {
            return bad("min_instances exceeds max_instances".into());
        }
        if self.min_instance_len == 0 || self.min_instance_len > self.max_instance_len {
            return bad(format!(
                "invalid instance length range {}..={}",
                self.min_instance_len, self.max_instance_len
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {} must be finite and non-negative", self.noise_sigma));
        }
        if !(self.score_level > 0.0 && self.score_level <= 1.0) {
            return bad(format!("score level {} outside (0, 1]", self.score_level));
        }
        Ok(())
    }

    pub fn category_names(&self) -> Vec<String> {
        (1..=self.num_classes).map(|k| format!("action_{k}")).collect()
    }
}

pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, config.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Generation(e.to_string()))?;
    let classes = config.num_classes + 1;
    let blocks: Vec<(String, usize)> = config.block_names.iter().map(|n| (n.clone(), classes)).collect();
    let dim = classes * blocks.len();

    let mut features = Vec::with_capacity(config.num_videos);
    let mut videos = Vec::with_capacity(config.num_videos);
    for v in 0..config.num_videos {
        let id = format!("{}_{v:04}", config.id_prefix);
        let t_v = rng.gen_range(config.min_snippets..=config.max_snippets);
        let n = rng.gen_range(config.min_instances..=config.max_instances);
        let lengths: Vec<usize> = (0..n)
            .map(|_| rng.gen_range(config.min_instance_len..=config.max_instance_len))
            .collect();
        let occupied = lengths.iter().sum::<usize>() + n.saturating_sub(1) * config.min_gap;
        if occupied > t_v {
            return Err(Error::Generation(format!(
                "video '{id}': {n} instances need {occupied} snippets but the video has {t_v}"
            )));
        }
        let slack = t_v - occupied;
        let mut offsets: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=slack)).collect();
        offsets.sort_unstable();

        let mut instances = Vec::with_capacity(n);
        let mut labels = vec![0usize; t_v];
        let mut cursor = 0;
        for (len, offset) in lengths.iter().zip(&offsets) {
            let start = cursor + offset;
            let category = rng.gen_range(1..=config.num_classes);
            labels[start..start + len].iter_mut().for_each(|l| *l = category);
            instances.push(ActionInstance {
                start: start as f64,
                end: (start + len) as f64,
                category,
            });
            cursor += len + config.min_gap;
        }

        let mut values = Vec::with_capacity(t_v * dim);
        for &label in &labels {
            for _ in 0..blocks.len() {
                let level = config.score_level + rng.gen_range(-0.05..=0.05);
                let level = level.min(1.0);
                let rest = (1.0 - level) / config.num_classes as f64;
                for c in 0..classes {
                    let base = if c == label { level } else { rest };
                    let jitter = if config.noise_sigma > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    values.push((base + jitter).clamp(0.0, 1.0) as f32);
                }
            }
        }
        features.push(SasFeatureSequence::new(id.clone(), t_v, &blocks, values)?);
        videos.push(VideoAnnotation {
            id,
            num_snippets: t_v,
            fps: 25.0,
            instances,
        });
    }
    let annotations = AnnotationSet {
        videos,
        categories: config.category_names(),
    };
    annotations.validate("synthetic dataset")?;
    Ok(SynthDataset { features, annotations })
}

/// Generates `num_train + num_test` videos from one seeded stream and splits
/// them in order; ids continue across the split.
pub fn synth_split(config: &SynthConfig, num_train: usize, num_test: usize, seed: u64) -> Result<(SynthDataset, SynthDataset)> {
    let all = synth_generate(
        &SynthConfig {
            num_videos: num_train + num_test,
            ..config.clone()
        },
        seed,
    )?;
    let mut features = all.features;
    let mut videos = all.annotations.videos;
    let test_features = features.split_off(num_train);
    let test_videos = videos.split_off(num_train);
    let categories = all.annotations.categories;
    Ok((
        SynthDataset {
            features,
            annotations: AnnotationSet {
                videos,
                categories: categories.clone(),
            },
        },
        SynthDataset {
            features: test_features,
            annotations: AnnotationSet {
                videos: test_videos,
                categories,
            },
        },
    ))
}
