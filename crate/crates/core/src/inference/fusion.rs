//! Mean snippet-level scores and score fusion.

use serde::{Deserialize, Serialize};

use crate::data::SasFeatureSequence;
use crate::error::{Error, Result};
use crate::model::{FusedScore, PredictionInstance};
use crate::tensor::softmax_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub use_class: bool,
    pub use_sas: bool,
    pub use_over: bool,
    pub nms_threshold: f64,
    /// Drop candidates whose fused background score beats every action.
    pub background_suppression: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            use_class: true,
            use_sas: true,
            use_over: true,
            nms_threshold: 0.1,
            background_suppression: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.use_class || self.use_sas) {
            return Err(Error::config("fusion needs class scores, snippet scores, or both"));
        }
        if !(0.0..=1.0).contains(&self.nms_threshold) {
            return Err(Error::config(format!("NMS threshold {} outside [0, 1]", self.nms_threshold)));
        }
        Ok(())
    }
}

/// Column of each detection class within a feature block. `None` leaves
/// that class at zero in the mean score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    columns: Vec<Option<usize>>,
}

impl ClassMap {
    pub fn identity(num_classes: usize) -> Self {
        Self {
            columns: (0..num_classes).map(Some).collect(),
        }
    }

    pub fn new(columns: Vec<Option<usize>>) -> Self {
        Self { columns }
    }

    /// Identity when every block is exactly `num_classes` wide; otherwise
    /// an explicit map is required.
    pub fn for_sequence(seq: &SasFeatureSequence, num_classes: usize) -> Result<Self> {
        let map = Self::identity(num_classes);
        map.check(seq)?;
        Ok(map)
    }

    pub fn num_classes(&self) -> usize {
        self.columns.len()
    }

    pub fn check(&self, seq: &SasFeatureSequence) -> Result<()> {
        for block in seq.blocks() {
            if let Some(c) = self.columns.iter().flatten().find(|&&c| c >= block.width) {
                return Err(Error::config(format!(
                    "class map column {c} does not fit block '{}' of width {} in '{}'",
                    block.name,
                    block.width,
                    seq.video_id()
                )));
            }
        }
        Ok(())
    }
}

/// Mean over blocks and snippets of the mapped block scores on `[start, end)`.
///
/// The covered snippets are `floor(start)..=ceil(end) - 1`, clamped to the
/// video. An empty range yields zeros.
pub fn mean_sas(seq: &SasFeatureSequence, start: f64, end: f64, map: &ClassMap) -> Vec<f64> {
    let mut out = vec![0.0; map.num_classes()];
    let t_v = seq.num_snippets() as f64;
    let first = start.floor().max(0.0);
    let last = (end.ceil() - 1.0).min(t_v - 1.0);
    if !(first <= last) {
        log::warn!(
            "'{}': empty snippet range [{start}, {end}) for mean score",
            seq.video_id()
        );
        return out;
    }
    let (first, last) = (first as usize, last as usize);
    for t in first..=last {
        let row = seq.row(t);
        for block in seq.blocks() {
            for (o, col) in out.iter_mut().zip(&map.columns) {
                if let Some(c) = col {
                    *o += row[block.offset + c] as f64;
                }
            }
        }
    }
    let denom = (seq.blocks().len() * (last - first + 1)) as f64;
    out.iter_mut().for_each(|v| *v /= denom);
    out
}

/// Fuses class probabilities, mean snippet scores and the overlap score; the
/// category is the best action class, background excluded.
pub fn fuse_scores(p_class: &[f64], p_sas: &[f64], p_over: f64, cfg: &FusionConfig) -> FusedScore {
    let mut scores: Vec<f64> = (0..p_class.len())
        .map(|j| {
            let c = if cfg.use_class { p_class[j] } else { 0.0 };
            let s = if cfg.use_sas { p_sas[j] } else { 0.0 };
            c + s
        })
        .collect();
    if cfg.use_over {
        scores.iter_mut().for_each(|v| *v *= p_over);
    }
    let mut category = 1;
    for j in 2..scores.len() {
        if scores[j] > scores[category] {
            category = j;
        }
    }
    FusedScore {
        confidence: scores[category],
        category,
        scores,
    }
}

/// Attaches fused scores to a decoded instance; raw class logits are
/// softmax-normalized first.
pub fn fuse(instance: &PredictionInstance, p_sas: &[f64], cfg: &FusionConfig) -> PredictionInstance {
    let p_class = softmax_unchecked(&instance.class_scores);
    let fused = fuse_scores(&p_class, p_sas, instance.overlap, cfg);
    PredictionInstance {
        class_scores: p_class,
        fused: Some(fused),
        ..instance.clone()
    }
}
