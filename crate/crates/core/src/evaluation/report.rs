//! Dataset-level evaluation across categories and thresholds.

use std::collections::HashMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ap::{average_precision, check_threshold, GroundTruthSegment, Interpolation, MatchedPair};
use crate::data::{AnnotationSet, Detection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAp {
    pub category: usize,
    pub name: String,
    /// `None` when the category has no ground truth.
    pub ap: Option<f64>,
    pub num_predictions: usize,
    pub num_ground_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub theta: f64,
    pub map: f64,
    pub categories: Vec<CategoryAp>,
    /// Prediction indices refer to the evaluated prediction list; ground
    /// truth indices to the instance list of the named video.
    pub matches: Vec<MatchedPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub interpolation: Interpolation,
    pub num_predictions: usize,
    pub num_ground_truth: usize,
    pub thresholds: Vec<ThresholdReport>,
}

impl EvalReport {
    pub fn map_at(&self, theta: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|t| (t.theta - theta).abs() < 1e-9)
            .map(|t| t.map)
    }

    /// Plain-text table in percent, one column per threshold from the
    /// largest down, with a row for mAP followed by one per category.
    pub fn to_table(&self, label: &str) -> String {
        let mut cols: Vec<&ThresholdReport> = self.thresholds.iter().collect();
        cols.sort_by(|a, b| b.theta.total_cmp(&a.theta));
        let names: Vec<String> = cols
            .first()
            .map(|t| t.categories.iter().map(|c| format!("  {}", c.name)).collect())
            .unwrap_or_default();
        let width = names.iter().map(String::len).chain([label.len(), 5]).max().unwrap_or(5);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "θ");
        for t in &cols {
            let _ = write!(out, " {:>6}", format!("{:.2}", t.theta));
        }
        out.push('\n');
        let _ = write!(out, "{label:<width$}");
        for t in &cols {
            let _ = write!(out, " {:>6.1}", 100.0 * t.map);
        }
        out.push('\n');
        for (i, name) in names.iter().enumerate() {
            let _ = write!(out, "{name:<width$}");
            for t in &cols {
                match t.categories[i].ap {
                    Some(ap) => {
                        let _ = write!(out, " {:>6.1}", 100.0 * ap);
                    }
                    None => {
                        let _ = write!(out, " {:>6}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Parses `start:end:step` (inclusive) or a comma-separated list.
pub fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::config(format!("cannot parse thresholds '{spec}'"));
    let values: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [lo, hi, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    for &t in &values {
        check_threshold(t)?;
    }
    Ok(values)
}

pub fn evaluate(
    predictions: &[Detection],
    annotations: &AnnotationSet,
    thresholds: &[f64],
    mode: Interpolation,
) -> Result<EvalReport> {
    for &t in thresholds {
        check_threshold(t)?;
    }
    let k = annotations.num_categories();
    let videos: HashMap<&str, usize> = annotations
        .videos
        .iter()
        .enumerate()
        .map(|(i, v)| (v.id.as_str(), i))
        .collect();
    for d in predictions {
        if d.category < 1 || d.category > k {
            return Err(Error::Evaluation(format!(
                "prediction for '{}' has unknown category {} (annotations define 1..={k})",
                d.video_id, d.category
            )));
        }
        if !videos.contains_key(d.video_id.as_str()) {
            return Err(Error::Evaluation(format!(
                "prediction refers to unknown video '{}'",
                d.video_id
            )));
        }
    }

    // per category: predictions with global indices, ground truth with (video, instance) indices
    let mut preds: Vec<(Vec<usize>, Vec<Detection>)> = vec![(Vec::new(), Vec::new()); k + 1];
    for (i, d) in predictions.iter().enumerate() {
        preds[d.category].0.push(i);
        preds[d.category].1.push(d.clone());
    }
    let mut gts: Vec<(Vec<usize>, Vec<GroundTruthSegment>)> = vec![(Vec::new(), Vec::new()); k + 1];
    let mut num_ground_truth = 0;
    for v in &annotations.videos {
        for (j, inst) in v.instances.iter().enumerate() {
            gts[inst.category].0.push(j);
            gts[inst.category].1.push(GroundTruthSegment {
                video_id: v.id.clone(),
                start: inst.start,
                end: inst.end,
            });
            num_ground_truth += 1;
        }
    }

    let mut reports = Vec::with_capacity(thresholds.len());
    for &theta in thresholds {
        let mut categories = Vec::with_capacity(k);
        let mut matches = Vec::new();
        for c in 1..=k {
            let (pred_idx, pred) = &preds[c];
            let (gt_idx, gt) = &gts[c];
            let r = average_precision(pred, gt, theta, mode)?;
            matches.extend(r.pairs.into_iter().map(|p| MatchedPair {
                prediction: pred_idx[p.prediction],
                ground_truth: gt_idx[p.ground_truth],
                ..p
            }));
            categories.push(CategoryAp {
                category: c,
                name: annotations.categories[c - 1].clone(),
                ap: (!gt.is_empty()).then_some(r.ap),
                num_predictions: pred.len(),
                num_ground_truth: gt.len(),
            });
        }
        let present: Vec<f64> = categories.iter().filter_map(|c| c.ap).collect();
        let map = if present.is_empty() {
            log::warn!("no category has ground truth; mAP reported as 0");
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        matches.sort_by_key(|m| m.prediction);
        reports.push(ThresholdReport {
            theta,
            map,
            categories,
            matches,
        });
    }
    Ok(EvalReport {
        interpolation: mode,
        num_predictions: predictions.len(),
        num_ground_truth,
        thresholds: reports,
    })
}
