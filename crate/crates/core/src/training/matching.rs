//! Label assignment of default anchors to ground-truth instances.

use std::cmp::Ordering;

use crate::data::ActionInstance;
use crate::error::{Error, Result};
use crate::model::AnchorGeometry;
use crate::segment::Segment;

/// IoU an anchor's default segment must exceed to become a positive.
pub const POSITIVE_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedAnchor {
    pub anchor: usize,
    /// Assigned category; 0 marks a negative.
    pub category: usize,
    /// IoU with the best ground truth, kept for negatives too.
    pub iou: f64,
    pub target_center: f64,
    pub target_width: f64,
    /// Index of the best ground truth in the input slice.
    pub ground_truth: usize,
}

impl MatchedAnchor {
    pub fn is_positive(&self) -> bool {
        self.category > 0
    }
}

/// Orders candidates so that the preferred ground truth compares greatest:
/// higher IoU, then earlier start, lower category, earlier end.
fn preference(a: (f64, &ActionInstance), b: (f64, &ActionInstance)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| b.1.start.total_cmp(&a.1.start))
        .then_with(|| b.1.category.cmp(&a.1.category))
        .then_with(|| b.1.end.total_cmp(&a.1.end))
}

/// Matches every anchor by its default geometry to its highest-IoU ground
/// truth; the anchor is positive when that IoU exceeds [`POSITIVE_IOU`].
pub fn match_anchors(anchors: &[AnchorGeometry], ground_truth: &[ActionInstance]) -> Result<Vec<MatchedAnchor>> {
    if ground_truth.is_empty() {
        return Err(Error::usage("cannot match anchors in a window without ground truth"));
    }
    let segments: Vec<Segment> = ground_truth.iter().map(|g| Segment::new(g.start, g.end)).collect();
    let matched = anchors
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let default = Segment::from_center(a.center, a.width);
            let (best, iou) = segments
                .iter()
                .enumerate()
                .map(|(j, s)| (j, default.iou(s)))
                .max_by(|x, y| preference((x.1, &ground_truth[x.0]), (y.1, &ground_truth[y.0])))
                .expect("non-empty ground truth");
            let g = &ground_truth[best];
            MatchedAnchor {
                anchor: i,
                category: if iou > POSITIVE_IOU { g.category } else { 0 },
                iou,
                target_center: g.center(),
                target_width: g.width(),
                ground_truth: best,
            }
        })
        .collect();
    Ok(matched)
}

/// Ground-truth indices that no anchor matched as a positive.
pub fn unmatched_ground_truth(matched: &[MatchedAnchor], num_ground_truth: usize) -> Vec<usize> {
    let mut hit = vec![false; num_ground_truth];
    for m in matched.iter().filter(|m| m.is_positive()) {
        hit[m.ground_truth] = true;
    }
    (0..num_ground_truth).filter(|&i| !hit[i]).collect()
}
