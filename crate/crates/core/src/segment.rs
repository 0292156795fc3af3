//! One-dimensional segments and their intersection over union.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn from_center(center: f64, width: f64) -> Self {
        Self {
            start: center - 0.5 * width,
            end: center + 0.5 * width,
        }
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    /// IoU without validating widths; degenerate inputs give 0.
    pub fn iou(&self, other: &Segment) -> f64 {
        let inter = (self.end.min(other.end) - self.start.max(other.start)).max(0.0);
        let union = self.width() + other.width() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

/// Interval IoU: intersection length over union length.
pub fn iou_1d(a: Segment, b: Segment) -> Result<f64> {
    for s in [a, b] {
        if !(s.width() > 0.0) {
            return Err(Error::usage(format!(
                "segment [{}, {}] must have positive width",
                s.start, s.end
            )));
        }
    }
    Ok(a.iou(&b))
}
