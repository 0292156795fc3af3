//! Mini-batch training loop with Adam.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::loss::{detection_loss, l2_penalty, LossBreakdown, LossTerm, LossWeights};
use super::matching::{match_anchors, unmatched_ground_truth, MatchedAnchor};
use super::mining::{hard_negative_mine, Selection};
use crate::data::{shuffle_training_set, ActionInstance, Window};
use crate::error::{Error, Result};
use crate::model::{Network, SsadOutput};
use crate::seed::derive_seed;
use crate::tensor::{sigmoid, Adam, AdamConfig, Objective, Parameter, Tensor};

/// Loss magnitude treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub weights: LossWeights,
    /// Negatives kept per positive in each window.
    pub negative_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 1e-4,
            batch_size: 16,
            seed: 0,
            weights: LossWeights::default(),
            negative_ratio: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config(format!("learning rate {} is invalid", self.learning_rate)));
        }
        if !(self.negative_ratio.is_finite() && self.negative_ratio >= 0.0) {
            return Err(Error::config(format!("negative ratio {} is invalid", self.negative_ratio)));
        }
        self.weights.validate()
    }
}

/// A training window with its anchor assignment, computed once.
#[derive(Debug, Clone)]
pub struct PreparedWindow {
    pub video_id: String,
    pub start: usize,
    pub features: Tensor,
    pub ground_truth: Vec<ActionInstance>,
    pub matches: Vec<MatchedAnchor>,
}

impl PreparedWindow {
    pub fn num_positives(&self) -> usize {
        self.matches.iter().filter(|m| m.is_positive()).count()
    }
}

pub fn prepare_windows(network: &Network, windows: Vec<Window>) -> Result<Vec<PreparedWindow>> {
    let cfg = network.config();
    windows
        .into_iter()
        .map(|w| {
            if w.features.shape() != [cfg.window_len, cfg.input_dim] {
                return Err(Error::usage(format!(
                    "window of '{}' has shape {:?}, network expects [{}, {}]",
                    w.video_id,
                    w.features.shape(),
                    cfg.window_len,
                    cfg.input_dim
                )));
            }
            if let Some(g) = w.ground_truth.iter().find(|g| g.category >= cfg.num_classes) {
                return Err(Error::usage(format!(
                    "category {} in '{}' exceeds the network's {} classes",
                    g.category,
                    w.video_id,
                    cfg.num_classes - 1
                )));
            }
            let matches = match_anchors(network.anchors(), &w.ground_truth)?;
            for g in unmatched_ground_truth(&matches, w.ground_truth.len()) {
                let inst = &w.ground_truth[g];
                log::warn!(
                    "'{}' window at {}: instance [{:.3}, {:.3}] has no anchor above the positive IoU",
                    w.video_id,
                    w.start,
                    inst.start,
                    inst.end
                );
            }
            Ok(PreparedWindow {
                video_id: w.video_id,
                start: w.start,
                features: w.features,
                ground_truth: w.ground_truth,
                matches,
            })
        })
        .collect()
}

type Selector<'s> = dyn FnMut(usize, &PreparedWindow, &[f64]) -> Selection + 's;

/// Forward pass, selection and loss over a batch of windows. Normalization
/// counts are aggregated over the whole batch. With `with_grad`, parameter
/// gradients are reset and filled with the gradient of the total loss.
fn evaluate_batch(
    network: &mut Network,
    windows: &[&PreparedWindow],
    weights: &LossWeights,
    select: &mut Selector<'_>,
    with_grad: bool,
) -> Result<LossBreakdown> {
    let k = network.config().num_classes;
    let (alpha_c, alpha_w) = (network.config().alpha_center, network.config().alpha_width);
    let mut flats = Vec::with_capacity(windows.len());
    let mut traces = Vec::with_capacity(windows.len());
    let mut selections = Vec::with_capacity(windows.len());
    for (i, w) in windows.iter().enumerate() {
        let (out, trace) = if with_grad {
            let (o, t) = network.forward_traced(&w.features)?;
            (o, Some(t))
        } else {
            (network.forward(&w.features)?, None)
        };
        let flat = out.to_flat();
        let overlap: Vec<f64> = (0..flat.rows()).map(|r| sigmoid(flat.row(r)[k])).collect();
        selections.push(select(i, w, &overlap));
        flats.push(flat);
        traces.push(trace);
    }
    let anchors = network.anchors();
    let mut owners = Vec::new();
    let mut terms = Vec::new();
    for (i, (w, sel)) in windows.iter().zip(&selections).enumerate() {
        for idx in sel.indices() {
            owners.push((i, idx));
            terms.push(LossTerm {
                raw: flats[i].row(idx),
                anchor: anchors[idx],
                matched: w.matches[idx],
            });
        }
    }
    let (mut loss, row_grads) = detection_loss(&terms, weights, alpha_c, alpha_w, with_grad);
    drop(terms);
    loss.l2 = l2_penalty(network.parameters(), weights.lambda);
    loss.total += loss.l2;

    if with_grad {
        network.zero_grad();
        let mut grad_flats: Vec<Tensor> = flats.iter().map(|f| Tensor::zeros(f.shape())).collect();
        for (&(i, idx), g) in owners.iter().zip(&row_grads) {
            grad_flats[i].row_mut(idx).copy_from_slice(g);
        }
        let counts = network.anchor_counts();
        for (trace, g) in traces.iter().zip(&grad_flats) {
            let maps = SsadOutput::from_flat(g, &counts)?;
            network.backward(trace.as_ref().expect("traced forward"), maps.maps())?;
        }
        for p in network.parameters_mut() {
            let (value, grad) = p.value_and_grad_mut();
            for (g, v) in grad.data_mut().iter_mut().zip(value.data()) {
                *g += 2.0 * weights.lambda * v;
            }
        }
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub class_loss: f64,
    pub over_loss: f64,
    pub loc_loss: f64,
    pub l2: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub wallclock_s: f64,
}

pub struct Trainer {
    network: Network,
    last_good: Network,
    adam: Adam,
    config: TrainConfig,
    windows: Vec<PreparedWindow>,
    epochs_done: usize,
    steps: usize,
}

impl Trainer {
    pub fn new(network: Network, windows: Vec<PreparedWindow>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if windows.is_empty() {
            return Err(Error::usage("no training windows contain ground truth"));
        }
        let adam = Adam::new(
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
            network.parameters(),
        );
        Ok(Self {
            last_good: network.clone(),
            network,
            adam,
            config,
            windows,
            epochs_done: 0,
            steps: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn into_network(self) -> Network {
        self.network
    }

    /// Parameters as of the last completed epoch.
    pub fn last_good(&self) -> &Network {
        &self.last_good
    }

    pub fn windows(&self) -> &[PreparedWindow] {
        &self.windows
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// One optimizer step on the given window indices. Negatives are mined
    /// with seeds derived from `mining_seed` and each window's index.
    pub fn step(&mut self, batch: &[usize], mining_seed: u64) -> Result<LossBreakdown> {
        let ratio = self.config.negative_ratio;
        let windows: Vec<&PreparedWindow> = batch.iter().map(|&i| &self.windows[i]).collect();
        let mut select = |i: usize, w: &PreparedWindow, overlap: &[f64]| {
            hard_negative_mine(&w.matches, overlap, ratio, derive_seed(mining_seed, batch[i] as u64))
        };
        let loss = evaluate_batch(&mut self.network, &windows, &self.config.weights, &mut select, true)?;
        let finite_grads = self.network.parameters().iter().all(|p| p.grad().is_finite());
        if !loss.total.is_finite() || loss.total > DIVERGENCE_LIMIT || !finite_grads {
            return Err(Error::Numeric(format!(
                "training diverged at step {} (epoch {}): total {:.6e}, class {:.6e}, over {:.6e}, \
                 loc {:.6e}, l2 {:.6e}, {} positives, {} negatives, finite gradients: {finite_grads}",
                self.steps + 1,
                self.epochs_done + 1,
                loss.total,
                loss.class,
                loss.over,
                loss.loc,
                loss.l2,
                loss.n_pos,
                loss.n_neg
            )));
        }
        self.adam.step(self.network.parameters_mut())?;
        self.steps += 1;
        Ok(loss)
    }

    pub fn run_epoch(&mut self, started: Instant) -> Result<EpochRecord> {
        let epoch = self.epochs_done + 1;
        let mut order: Vec<usize> = (0..self.windows.len()).collect();
        shuffle_training_set(&mut order, derive_seed(self.config.seed, 2 * epoch as u64));
        let mining_seed = derive_seed(self.config.seed, 2 * epoch as u64 + 1);
        let mut sum = LossBreakdown::default();
        let mut batches = 0usize;
        for batch in order.chunks(self.config.batch_size) {
            let loss = self.step(batch, mining_seed)?;
            sum.total += loss.total;
            sum.class += loss.class;
            sum.over += loss.over;
            sum.loc += loss.loc;
            sum.l2 += loss.l2;
            sum.n_pos += loss.n_pos;
            sum.n_neg += loss.n_neg;
            batches += 1;
        }
        self.epochs_done = epoch;
        self.last_good = self.network.clone();
        let n = batches as f64;
        Ok(EpochRecord {
            epoch,
            mean_loss: sum.total / n,
            class_loss: sum.class / n,
            over_loss: sum.over / n,
            loc_loss: sum.loc / n,
            l2: sum.l2 / n,
            n_pos: sum.n_pos,
            n_neg: sum.n_neg,
            wallclock_s: started.elapsed().as_secs_f64(),
        })
    }

    /// Runs all configured epochs, calling `on_epoch` after each one.
    pub fn train(&mut self, mut on_epoch: impl FnMut(&EpochRecord, &Network) -> Result<()>) -> Result<Vec<EpochRecord>> {
        let started = Instant::now();
        let mut records = Vec::with_capacity(self.config.epochs);
        while self.epochs_done < self.config.epochs {
            let record = self.run_epoch(started)?;
            log::info!(
                "epoch {} loss {:.4} (class {:.4}, over {:.4}, loc {:.4}, l2 {:.4})",
                record.epoch,
                record.mean_loss,
                record.class_loss,
                record.over_loss,
                record.loc_loss,
                record.l2
            );
            on_epoch(&record, &self.network)?;
            records.push(record);
        }
        Ok(records)
    }
}

/// The full training loss on a fixed set of windows with a frozen selection,
/// for gradient checking.
pub struct LossObjective {
    network: Network,
    windows: Vec<PreparedWindow>,
    selections: Vec<Selection>,
    weights: LossWeights,
}

impl LossObjective {
    /// Mines the selection once at the starting parameters and then keeps it.
    pub fn new(mut network: Network, windows: Vec<PreparedWindow>, weights: LossWeights, seed: u64) -> Result<Self> {
        let mut selections = Vec::new();
        {
            let refs: Vec<&PreparedWindow> = windows.iter().collect();
            let mut select = |i: usize, w: &PreparedWindow, overlap: &[f64]| {
                let s = hard_negative_mine(&w.matches, overlap, 1.0, derive_seed(seed, i as u64));
                selections.push(s.clone());
                s
            };
            evaluate_batch(&mut network, &refs, &weights, &mut select, false)?;
        }
        Ok(Self {
            network,
            windows,
            selections,
            weights,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }
}

impl Objective for LossObjective {
    fn parameters(&self) -> &[Parameter] {
        self.network.parameters()
    }

    fn parameters_mut(&mut self) -> &mut [Parameter] {
        self.network.parameters_mut()
    }

    fn evaluate(&mut self, with_grad: bool) -> Result<f64> {
        let refs: Vec<&PreparedWindow> = self.windows.iter().collect();
        let selections = &self.selections;
        let mut select = |i: usize, _: &PreparedWindow, _: &[f64]| selections[i].clone();
        Ok(evaluate_batch(&mut self.network, &refs, &self.weights, &mut select, with_grad)?.total)
    }
}
