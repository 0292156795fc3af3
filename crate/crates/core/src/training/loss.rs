//! Classification, overlap and location losses and their gradients with
//! respect to each anchor's raw prediction row.

use serde::{Deserialize, Serialize};

use super::MatchedAnchor;
use crate::error::{Error, Result};
use crate::model::{decode_location, AnchorGeometry, RawPrediction};
use crate::tensor::{sigmoid, Parameter};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Overlap term weight.
    pub alpha: f64,
    /// Location term weight.
    pub beta: f64,
    /// L2 weight over every network parameter.
    pub lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 10.0,
            lambda: 1e-4,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.lambda].iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::config(format!("loss weights must be finite and non-negative, got {self:?}")))
        }
    }
}

/// One selected anchor: its raw outputs, default geometry and assignment.
#[derive(Debug, Clone, Copy)]
pub struct LossTerm<'a> {
    pub raw: &'a [f64],
    pub anchor: AnchorGeometry,
    pub matched: MatchedAnchor,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub class: f64,
    pub over: f64,
    pub loc: f64,
    /// Weighted L2 term `λ·Σθ²`.
    pub l2: f64,
    pub total: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub fn smooth_l1(x: f64) -> f64 {
    if x.abs() < 1.0 {
        0.5 * x * x
    } else {
        x.abs() - 0.5
    }
}

fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Mean softmax cross-entropy over all terms.
pub fn classification_loss(terms: &[LossTerm<'_>]) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let sum: f64 = terms
        .iter()
        .map(|t| {
            let raw = RawPrediction::from_row(t.raw);
            log_sum_exp(raw.class_logits) - raw.class_logits[t.matched.category]
        })
        .sum();
    sum / terms.len() as f64
}

/// Mean squared error between predicted overlap and matched IoU over all terms.
pub fn overlap_loss(terms: &[LossTerm<'_>]) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let sum: f64 = terms
        .iter()
        .map(|t| (sigmoid(RawPrediction::from_row(t.raw).overlap_logit) - t.matched.iou).powi(2))
        .sum();
    sum / terms.len() as f64
}

/// Mean smooth-L1 error of decoded center and width over positive terms.
pub fn location_loss(terms: &[LossTerm<'_>], alpha_center: f64, alpha_width: f64) -> f64 {
    let positives: Vec<&LossTerm<'_>> = terms.iter().filter(|t| t.matched.is_positive()).collect();
    if positives.is_empty() {
        return 0.0;
    }
    let sum: f64 = positives
        .iter()
        .map(|t| {
            let raw = RawPrediction::from_row(t.raw);
            let (c, w, _) = decode_location(&t.anchor, raw.center_offset, raw.width_offset, alpha_center, alpha_width);
            smooth_l1(c - t.matched.target_center) + smooth_l1(w - t.matched.target_width)
        })
        .sum();
    sum / positives.len() as f64
}

/// Classification, overlap and location losses of a batch of terms, weighted
/// by `weights` (the L2 term is left at zero). With `with_grad`, also returns
/// the gradient of the weighted sum with respect to each term's raw row.
pub fn detection_loss(
    terms: &[LossTerm<'_>],
    weights: &LossWeights,
    alpha_center: f64,
    alpha_width: f64,
    with_grad: bool,
) -> (LossBreakdown, Vec<Vec<f64>>) {
    let n_train = terms.len();
    let n_pos = terms.iter().filter(|t| t.matched.is_positive()).count();
    let mut out = LossBreakdown {
        n_pos,
        n_neg: n_train - n_pos,
        ..LossBreakdown::default()
    };
    let mut grads = Vec::with_capacity(if with_grad { n_train } else { 0 });
    for t in terms {
        let raw = RawPrediction::from_row(t.raw);
        let k = raw.class_logits.len();
        let lse = log_sum_exp(raw.class_logits);
        out.class += (lse - raw.class_logits[t.matched.category]) / n_train as f64;
        let p_over = sigmoid(raw.overlap_logit);
        let residual = p_over - t.matched.iou;
        out.over += residual * residual / n_train as f64;
        let loc = if t.matched.is_positive() {
            let (c, w, unclamped) =
                decode_location(&t.anchor, raw.center_offset, raw.width_offset, alpha_center, alpha_width);
            let (dc, dw) = (c - t.matched.target_center, w - t.matched.target_width);
            out.loc += (smooth_l1(dc) + smooth_l1(dw)) / n_pos as f64;
            Some((dc, dw, w, unclamped))
        } else {
            None
        };
        if with_grad {
            let mut g = vec![0.0; t.raw.len()];
            for (j, z) in raw.class_logits.iter().enumerate() {
                g[j] = (z - lse).exp() / n_train as f64;
            }
            g[t.matched.category] -= 1.0 / n_train as f64;
            g[k] = weights.alpha * 2.0 * residual * p_over * (1.0 - p_over) / n_train as f64;
            if let Some((dc, dw, w, unclamped)) = loc {
                let scale = weights.beta / n_pos as f64;
                g[k + 1] = scale * smooth_l1_grad(dc) * alpha_center * t.anchor.width;
                if unclamped {
                    g[k + 2] = scale * smooth_l1_grad(dw) * alpha_width * w;
                }
            }
            grads.push(g);
        }
    }
    out.total = out.class + weights.alpha * out.over + weights.beta * out.loc;
    (out, grads)
}

/// `λ·Σθ²` over all parameters.
pub fn l2_penalty(params: &[Parameter], lambda: f64) -> f64 {
    lambda * params.iter().map(|p| p.value().sum_squares()).sum::<f64>()
}

/// Full objective: detection losses plus the L2 penalty.
pub fn total_loss(
    terms: &[LossTerm<'_>],
    weights: &LossWeights,
    alpha_center: f64,
    alpha_width: f64,
    params: &[Parameter],
) -> LossBreakdown {
    let (mut out, _) = detection_loss(terms, weights, alpha_center, alpha_width, false);
    out.l2 = l2_penalty(params, weights.lambda);
    out.total += out.l2;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn anchor() -> AnchorGeometry {
        AnchorGeometry {
            layer: 0,
            cell: 0,
            center: 0.5,
            width: 0.25,
            ratio: 1.0,
        }
    }

    fn matched(category: usize, iou: f64, center: f64, width: f64) -> MatchedAnchor {
        MatchedAnchor {
            anchor: 0,
            category,
            iou,
            target_center: center,
            target_width: width,
            ground_truth: 0,
        }
    }

    #[test]
    fn uniform_logits_give_ln3() {
        let row = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let t = LossTerm { raw: &row, anchor: anchor(), matched: matched(1, 0.7, 0.5, 0.25) };
        assert!((classification_loss(&[t]) - 3f64.ln()).abs() < 1e-12);
        let confident = [0.0, 30.0, 0.0, 0.0, 0.0, 0.0];
        let t = LossTerm { raw: &confident, ..t };
        assert!(classification_loss(&[t]) < 1e-12);
    }

    #[test]
    fn overlap_quarter() {
        let row = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let t = LossTerm { raw: &row, anchor: anchor(), matched: matched(1, 1.0, 0.5, 0.25) };
        assert!((overlap_loss(&[t]) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn smooth_l1_values() {
        let row = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let t = LossTerm { raw: &row, anchor: anchor(), matched: matched(1, 1.0, 0.0, 0.25) };
        assert!((location_loss(&[t], 0.1, 0.1) - 0.125).abs() < 1e-12);
        assert_eq!(smooth_l1(2.0), 1.5);
        let neg = LossTerm { matched: matched(0, 0.2, 0.0, 0.25), ..t };
        assert_eq!(location_loss(&[neg], 0.1, 0.1), 0.0);
    }

    #[test]
    fn crafted_weighted_sum() {
        let row = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let t = LossTerm { raw: &row, anchor: anchor(), matched: matched(1, 1.0, 0.0, 0.25) };
        let params = [Parameter::new("w", crate::tensor::Tensor::zeros(&[3]))];
        let out = total_loss(&[t], &LossWeights::default(), 0.1, 0.1, &params);
        assert!((out.class - 3f64.ln()).abs() < 1e-12);
        assert!((out.over - 0.25).abs() < 1e-12);
        assert!((out.loc - 0.125).abs() < 1e-12);
        assert!((out.total - (3f64.ln() + 2.5 + 1.25)).abs() < 1e-12);
    }

    #[test]
    fn zero_everything_is_zero() {
        // perfect class (large margin), perfect overlap and localization
        let row = [0.0, 800.0, 0.0, 0.0, 0.0];
        let t = LossTerm { raw: &row, anchor: anchor(), matched: matched(1, 0.5, 0.5, 0.25) };
        let params = [Parameter::new("w", crate::tensor::Tensor::zeros(&[2]))];
        assert_eq!(total_loss(&[t], &LossWeights::default(), 0.1, 0.1, &params).total, 0.0);
    }

    #[test]
    fn batch_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let terms: Vec<LossTerm<'_>> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| LossTerm {
                raw: r,
                anchor: anchor(),
                matched: matched(i % 4, rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.05..1.0)),
            })
            .collect();
        // direct per-instance sums
        let (mut c, mut o, mut l, mut np) = (0.0, 0.0, 0.0, 0);
        for t in &terms {
            let z = &t.raw[..4];
            let denom: f64 = z.iter().map(|v| v.exp()).sum();
            c += -(z[t.matched.category].exp() / denom).ln();
            o += (1.0 / (1.0 + (-t.raw[4]).exp()) - t.matched.iou).powi(2);
            if t.matched.category > 0 {
                np += 1;
                let pc = 0.5 + 0.1 * 0.25 * t.raw[5];
                let pw = 0.25 * (0.1 * t.raw[6]).exp();
                l += smooth_l1(pc - t.matched.target_center) + smooth_l1(pw - t.matched.target_width);
            }
        }
        let n = terms.len() as f64;
        assert!((classification_loss(&terms) - c / n).abs() < 1e-12);
        assert!((overlap_loss(&terms) - o / n).abs() < 1e-12);
        assert!((location_loss(&terms, 0.1, 0.1) - l / np as f64).abs() < 1e-12);
        let (b, _) = detection_loss(&terms, &LossWeights::default(), 0.1, 0.1, false);
        assert!((b.total - (c / n + 10.0 * o / n + 10.0 * l / np as f64)).abs() < 1e-12);
    }

    #[test]
    fn row_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rows: Vec<Vec<f64>> = (0..5).map(|_| (0..6).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
        let assigned: Vec<MatchedAnchor> = (0..5)
            .map(|i| matched(i % 3, rng.gen_range(0.0..1.0), rng.gen_range(0.2..0.8), rng.gen_range(0.1..0.9)))
            .collect();
        let w = LossWeights::default();
        let eval = |rows: &[Vec<f64>]| {
            let terms: Vec<LossTerm<'_>> = rows
                .iter()
                .zip(&assigned)
                .map(|(r, m)| LossTerm { raw: r, anchor: anchor(), matched: *m })
                .collect();
            detection_loss(&terms, &w, 0.1, 0.1, true)
        };
        let (_, grads) = eval(&rows);
        let h = 1e-6;
        for i in 0..rows.len() {
            for j in 0..rows[i].len() {
                let orig = rows[i][j];
                rows[i][j] = orig + h;
                let up = eval(&rows).0.total;
                rows[i][j] = orig - h;
                let down = eval(&rows).0.total;
                rows[i][j] = orig;
                let numeric = (up - down) / (2.0 * h);
                assert!((grads[i][j] - numeric).abs() < 1e-7, "row {i} col {j}: {} vs {numeric}", grads[i][j]);
            }
        }
    }

    #[test]
    fn negative_weights_rejected() {
        let w = LossWeights { alpha: -1.0, ..LossWeights::default() };
        assert!(matches!(w.validate(), Err(Error::Config(_))));
    }
}
