//! Fixed-length observation windows over a feature sequence.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ActionInstance, SasFeatureSequence};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub window_len: usize,
    /// Fraction of a window shared with its successor.
    pub overlap: f64,
    /// Minimum fraction of an instance that must lie inside a window for the
    /// instance to be kept as that window's ground truth.
    pub retain_fraction: f64,
    pub keep_empty: bool,
}

impl WindowConfig {
    pub fn training(window_len: usize) -> Self {
        Self {
            window_len,
            overlap: 0.75,
            retain_fraction: 0.75,
            keep_empty: false,
        }
    }

    pub fn prediction(window_len: usize) -> Self {
        Self {
            window_len,
            overlap: 0.25,
            retain_fraction: 0.75,
            keep_empty: true,
        }
    }

    pub fn stride(&self) -> usize {
        ((self.window_len as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub video_id: String,
    /// First snippet covered, in video coordinates.
    pub start: usize,
    pub window_len: usize,
    /// `window_len × D`; rows past the end of a short video repeat its last row.
    pub features: Tensor,
    /// Retained instances clipped to the window and scaled to `[0, 1]`.
    pub ground_truth: Vec<ActionInstance>,
}

impl Window {
    pub fn end(&self) -> usize {
        self.start + self.window_len
    }
}

/// Start offsets for windows of `window_len` stepping by `stride`, plus a
/// final window flush with the video end when the stride does not tile it.
pub fn window_starts(num_snippets: usize, window_len: usize, stride: usize) -> Vec<usize> {
    if num_snippets <= window_len {
        return vec![0];
    }
    let mut starts: Vec<usize> = (0..)
        .map(|i| i * stride)
        .take_while(|s| s + window_len <= num_snippets)
        .collect();
    let last = *starts.last().expect("first window always fits");
    if last + window_len < num_snippets {
        starts.push(num_snippets - window_len);
    }
    starts
}

fn retain(inst: &ActionInstance, start: f64, len: f64, fraction: f64) -> Option<ActionInstance> {
    let end = start + len;
    let lo = inst.start.max(start);
    let hi = inst.end.min(end);
    let inside = hi - lo;
    if inside <= 0.0 || inside < fraction * inst.width() - 1e-9 {
        return None;
    }
    Some(ActionInstance {
        start: (lo - start) / len,
        end: (hi - start) / len,
        category: inst.category,
    })
}

pub fn slide_windows(seq: &SasFeatureSequence, instances: &[ActionInstance], cfg: &WindowConfig) -> Result<Vec<Window>> {
    if cfg.window_len == 0 {
        return Err(Error::config("window length must be positive"));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::config(format!("window overlap {} outside [0, 1)", cfg.overlap)));
    }
    if !(cfg.retain_fraction > 0.0 && cfg.retain_fraction <= 1.0) {
        return Err(Error::config(format!(
            "retain fraction {} outside (0, 1]",
            cfg.retain_fraction
        )));
    }
    let t_v = seq.num_snippets();
    let d = seq.dim();
    let len = cfg.window_len;
    let mut windows = Vec::new();
    for start in window_starts(t_v, len, cfg.stride()) {
        let ground_truth: Vec<ActionInstance> = instances
            .iter()
            .filter_map(|inst| retain(inst, start as f64, len as f64, cfg.retain_fraction))
            .collect();
        if ground_truth.is_empty() && !cfg.keep_empty {
            continue;
        }
        let mut data = Vec::with_capacity(len * d);
        for t in start..start + len {
            let src = t.min(t_v - 1);
            data.extend(seq.row(src).iter().map(|&v| v as f64));
        }
        windows.push(Window {
            video_id: seq.video_id().to_string(),
            start,
            window_len: len,
            features: Tensor::matrix(len, d, data)?,
            ground_truth,
        });
    }
    Ok(windows)
}

/// Seeded permutation of the training windows.
pub fn shuffle_training_set<T>(items: &mut [T], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
}
