//! Default anchor segments and decoding of raw per-anchor predictions.

use serde::{Deserialize, Serialize};

use crate::tensor::sigmoid;

/// Offset scales are clamped to this range before exponentiation.
pub const MAX_WIDTH_OFFSET: f64 = 50.0;

/// Default segment attached to one cell of one anchor feature map, in
/// window-normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorGeometry {
    pub layer: usize,
    pub cell: usize,
    pub center: f64,
    pub width: f64,
    pub ratio: f64,
}

impl AnchorGeometry {
    pub fn start(&self) -> f64 {
        self.center - 0.5 * self.width
    }

    pub fn end(&self) -> f64 {
        self.center + 0.5 * self.width
    }
}

/// Anchors for a map of `cells` cells, ordered cell-major then by ratio.
/// Downstream reshaping of the prediction maps depends on this order.
pub fn anchor_grid(layer: usize, cells: usize, ratios: &[f64]) -> Vec<AnchorGeometry> {
    let scale = 1.0 / cells as f64;
    (0..cells)
        .flat_map(|m| {
            ratios.iter().map(move |&r| AnchorGeometry {
                layer,
                cell: m,
                center: (m as f64 + 0.5) / cells as f64,
                width: scale * r,
                ratio: r,
            })
        })
        .collect()
}

/// Borrowed view of one anchor's `K' + 3` raw outputs.
#[derive(Debug, Clone, Copy)]
pub struct RawPrediction<'a> {
    pub class_logits: &'a [f64],
    pub overlap_logit: f64,
    pub center_offset: f64,
    pub width_offset: f64,
}

impl<'a> RawPrediction<'a> {
    pub fn from_row(row: &'a [f64]) -> Self {
        let k = row.len() - 3;
        Self {
            class_logits: &row[..k],
            overlap_logit: row[k],
            center_offset: row[k + 1],
            width_offset: row[k + 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedScore {
    pub scores: Vec<f64>,
    pub confidence: f64,
    pub category: usize,
}

/// A decoded anchor. Coordinates are window-normalized and unclipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInstance {
    pub center: f64,
    pub width: f64,
    /// Raw logits after decoding; probabilities once normalized for fusion.
    pub class_scores: Vec<f64>,
    /// Sigmoid of the overlap logit.
    pub overlap: f64,
    pub fused: Option<FusedScore>,
}

impl PredictionInstance {
    pub fn start(&self) -> f64 {
        self.center - 0.5 * self.width
    }

    pub fn end(&self) -> f64 {
        self.center + 0.5 * self.width
    }

    pub fn confidence(&self) -> f64 {
        self.fused.as_ref().map_or(0.0, |f| f.confidence)
    }

    pub fn category(&self) -> usize {
        self.fused.as_ref().map_or(0, |f| f.category)
    }
}

/// Decoded `(center, width)` and the width's exponential factor, shared by
/// decoding and the location-loss gradient.
pub(crate) fn decode_location(anchor: &AnchorGeometry, dc: f64, dw: f64, alpha_center: f64, alpha_width: f64) -> (f64, f64, bool) {
    let center = anchor.center + alpha_center * anchor.width * dc;
    let clamped = dw.clamp(-MAX_WIDTH_OFFSET, MAX_WIDTH_OFFSET);
    let width = anchor.width * (alpha_width * clamped).exp();
    (center, width, clamped == dw)
}

pub fn decode_anchor(anchor: &AnchorGeometry, raw: &RawPrediction<'_>, alpha_center: f64, alpha_width: f64) -> PredictionInstance {
    let (center, width, _) = decode_location(anchor, raw.center_offset, raw.width_offset, alpha_center, alpha_width);
    PredictionInstance {
        center,
        width,
        class_scores: raw.class_logits.to_vec(),
        overlap: sigmoid(raw.overlap_logit),
        fused: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(dc: f64, dw: f64) -> Vec<f64> {
        vec![0.0, 0.0, 0.0, dc, dw]
    }

    #[test]
    fn four_cells_unit_ratio() {
        let g = anchor_grid(0, 4, &[1.0]);
        let centers: Vec<f64> = g.iter().map(|a| a.center).collect();
        assert_eq!(centers, vec![0.125, 0.375, 0.625, 0.875]);
        assert!(g.iter().all(|a| a.width == 0.25));
        assert_eq!(anchor_grid(0, 4, &[2.0])[0].width, 0.5);
    }

    #[test]
    fn default_grid_has_108_anchors() {
        let total = anchor_grid(0, 16, &[1.0, 1.5, 2.0]).len()
            + anchor_grid(1, 8, &[0.5, 0.75, 1.0, 1.5, 2.0]).len()
            + anchor_grid(2, 4, &[0.5, 0.75, 1.0, 1.5, 2.0]).len();
        assert_eq!(total, 16 * 3 + 8 * 5 + 4 * 5);
        assert_eq!(total, 108);
    }

    #[test]
    fn ordering_is_cell_major() {
        let g = anchor_grid(1, 3, &[0.5, 1.0]);
        let cells: Vec<usize> = g.iter().map(|a| a.cell).collect();
        assert_eq!(cells, vec![0, 0, 1, 1, 2, 2]);
        assert_eq!(g[3].ratio, 1.0);
    }

    #[test]
    fn zero_offsets_are_identity() {
        for a in anchor_grid(0, 16, &[1.0, 1.5, 2.0]) {
            let r = raw(0.0, 0.0);
            let p = decode_anchor(&a, &RawPrediction::from_row(&r), 0.1, 0.1);
            assert_eq!((p.center, p.width), (a.center, a.width));
            assert_eq!(p.overlap, 0.5);
        }
    }

    #[test]
    fn offset_arithmetic() {
        let a = AnchorGeometry {
            layer: 0,
            cell: 0,
            center: 0.5,
            width: 0.25,
            ratio: 1.0,
        };
        let r = raw(1.0, 0.0);
        let p = decode_anchor(&a, &RawPrediction::from_row(&r), 0.1, 0.1);
        assert!((p.center - 0.525).abs() < 1e-15);
        let r = raw(0.0, 10.0 * 2f64.ln());
        let p = decode_anchor(&a, &RawPrediction::from_row(&r), 0.1, 0.1);
        assert!((p.width - 0.5).abs() < 1e-15);
        assert!((p.start() - 0.25).abs() < 1e-15 && (p.end() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn huge_width_offset_stays_finite() {
        let a = anchor_grid(0, 4, &[1.0])[0];
        let r = raw(0.0, 1e6);
        let p = decode_anchor(&a, &RawPrediction::from_row(&r), 0.1, 0.1);
        assert!(p.width.is_finite() && p.width > 0.0);
    }
}
