//! Average precision of one category at one IoU threshold.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Detection;
use crate::error::{Error, Result};
use crate::inference::rank;
use crate::segment::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean of the envelope at recall 0, 0.1, …, 1.
    ElevenPoint,
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "allpoint" => Ok(Self::AllPoint),
            "11point" | "elevenpoint" => Ok(Self::ElevenPoint),
            other => Err(Error::config(format!("unknown interpolation '{other}', expected allpoint or 11point"))),
        }
    }
}

/// A ground-truth segment of the category being scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSegment {
    pub video_id: String,
    pub start: f64,
    pub end: f64,
}

/// A prediction matched to a ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub video_id: String,
    pub prediction: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApResult {
    pub ap: f64,
    /// True-positive flag per prediction in ranked order.
    pub hits: Vec<bool>,
    pub pairs: Vec<MatchedPair>,
}

pub fn check_threshold(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("IoU threshold {theta} outside (0, 1]")))
    }
}

/// Greedy matching in confidence order: each prediction takes the unmatched
/// ground truth of the same video with the highest IoU, provided it reaches
/// `theta`. Indices in the returned pairs refer to the input slices.
pub fn match_detections(
    predictions: &[Detection],
    ground_truth: &[GroundTruthSegment],
    theta: f64,
) -> (Vec<usize>, Vec<bool>, Vec<MatchedPair>) {
    let ranked = rank(predictions);
    let mut taken = vec![false; ground_truth.len()];
    let mut hits = Vec::with_capacity(ranked.len());
    let mut pairs = Vec::new();
    for &i in &ranked {
        let p = &predictions[i];
        let seg = Segment::new(p.start, p.end);
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in ground_truth.iter().enumerate() {
            if taken[j] || g.video_id != p.video_id {
                continue;
            }
            let iou = seg.iou(&Segment::new(g.start, g.end));
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        match best {
            Some((j, iou)) if iou >= theta => {
                taken[j] = true;
                hits.push(true);
                pairs.push(MatchedPair {
                    video_id: p.video_id.clone(),
                    prediction: i,
                    ground_truth: j,
                    iou,
                });
            }
            _ => hits.push(false),
        }
    }
    (ranked, hits, pairs)
}

/// Interpolated precision–recall area for ranked hit flags.
pub fn ap_from_hits(hits: &[bool], num_ground_truth: usize, mode: Interpolation) -> f64 {
    if num_ground_truth == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(hits.len());
    let mut precision = Vec::with_capacity(hits.len());
    for (i, &h) in hits.iter().enumerate() {
        tp += h as usize;
        recall.push(tp as f64 / num_ground_truth as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    // envelope: precision made non-increasing from the right
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    match mode {
        Interpolation::AllPoint => {
            let mut ap = 0.0;
            let mut prev = 0.0;
            for (r, p) in recall.iter().zip(&precision) {
                ap += (r - prev) * p;
                prev = *r;
            }
            ap
        }
        Interpolation::ElevenPoint => {
            let total: f64 = (0..=10)
                .map(|k| {
                    let level = k as f64 / 10.0;
                    recall
                        .iter()
                        .position(|&r| r >= level - 1e-12)
                        .map_or(0.0, |i| precision[i])
                })
                .sum();
            total / 11.0
        }
    }
}

pub fn average_precision(
    predictions: &[Detection],
    ground_truth: &[GroundTruthSegment],
    theta: f64,
    mode: Interpolation,
) -> Result<ApResult> {
    check_threshold(theta)?;
    let (_, hits, pairs) = match_detections(predictions, ground_truth, theta);
    Ok(ApResult {
        ap: ap_from_hits(&hits, ground_truth.len(), mode),
        hits,
        pairs,
    })
}
