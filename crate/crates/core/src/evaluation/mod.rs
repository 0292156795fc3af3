//! Per-category average precision and mAP over IoU thresholds.

mod ap;
mod report;

pub use ap::{
    ap_from_hits, average_precision, match_detections, ApResult, GroundTruthSegment, Interpolation, MatchedPair,
};
pub use report::{evaluate, parse_thresholds, CategoryAp, EvalReport, ThresholdReport};
