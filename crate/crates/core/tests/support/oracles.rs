//! Brute-force reference implementations and random instance generators
//! shared by the oracle tests and the acceptance suite.

#![allow(dead_code)]

use rand::Rng;
use ssad::data::{ActionInstance, Detection};
use ssad::evaluation::{GroundTruthSegment, Interpolation};
use ssad::model::AnchorGeometry;

/// Snippet grid for random endpoints; dyadic so every IoU is computed from
/// exact intersections and unions.
pub const GRID: f64 = 1.0 / 256.0;

/// Interval IoU written independently of the library.
pub fn ref_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    if a.1 <= b.0 || b.1 <= a.0 {
        return 0.0;
    }
    let inter = a.1.min(b.1) - a.0.max(b.0);
    let union = a.1.max(b.1) - a.0.min(b.0);
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Matching outcome of one anchor: (category or 0, iou, chosen instance).
pub type RefMatch = (usize, f64, ActionInstance);

/// Every anchor against every ground truth, keeping the lexicographically
/// smallest key (−iou, start, category, end).
pub fn ref_match(anchors: &[AnchorGeometry], gt: &[ActionInstance]) -> Vec<RefMatch> {
    anchors
        .iter()
        .map(|a| {
            let seg = (a.center - a.width / 2.0, a.center + a.width / 2.0);
            let mut keyed: Vec<(f64, ActionInstance)> =
                gt.iter().map(|g| (ref_iou(seg, (g.start, g.end)), *g)).collect();
            keyed.sort_by(|x, y| {
                y.0.partial_cmp(&x.0)
                    .unwrap()
                    .then(x.1.start.partial_cmp(&y.1.start).unwrap())
                    .then(x.1.category.cmp(&y.1.category))
                    .then(x.1.end.partial_cmp(&y.1.end).unwrap())
            });
            let (iou, g) = keyed.swap_remove(0);
            (if iou > 0.5 { g.category } else { 0 }, iou, g)
        })
        .collect()
}

/// Repeatedly takes the best remaining detection and removes everything of
/// the same category and video that overlaps it above `threshold`.
pub fn ref_nms(dets: &[Detection], threshold: f64) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..dets.len()).collect();
    let mut kept = Vec::new();
    while !pool.is_empty() {
        let mut best = 0;
        for p in 1..pool.len() {
            let (x, y) = (&dets[pool[p]], &dets[pool[best]]);
            let better = x.confidence > y.confidence
                || (x.confidence == y.confidence && (x.start < y.start || (x.start == y.start && pool[p] < pool[best])));
            if better {
                best = p;
            }
        }
        let top = pool.remove(best);
        kept.push(top);
        let t = &dets[top];
        pool.retain(|&i| {
            let d = &dets[i];
            !(d.category == t.category && d.video_id == t.video_id && ref_iou((d.start, d.end), (t.start, t.end)) > threshold)
        });
    }
    kept
}

/// Single-category AP: predictions ranked by confidence (ties by start,
/// then input order), each matched to the unmatched ground truth of its
/// video with the highest IoU, accepted at IoU ≥ theta.
pub fn ref_ap(dets: &[Detection], gt: &[GroundTruthSegment], theta: f64, mode: Interpolation) -> f64 {
    if gt.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap()
            .then(dets[a].start.partial_cmp(&dets[b].start).unwrap())
            .then(a.cmp(&b))
    });
    let mut used = vec![false; gt.len()];
    let mut tp = Vec::new();
    for &i in &order {
        let d = &dets[i];
        let mut cands: Vec<(f64, usize)> = gt
            .iter()
            .enumerate()
            .filter(|(_, g)| g.video_id == d.video_id)
            .map(|(j, g)| (ref_iou((d.start, d.end), (g.start, g.end)), j))
            .collect();
        cands.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
        let mut hit = false;
        for (iou, j) in cands {
            if used[j] {
                continue;
            }
            if iou >= theta {
                used[j] = true;
                hit = true;
            }
            break;
        }
        tp.push(hit);
    }
    let n = gt.len() as f64;
    let mut rec = Vec::new();
    let mut prec = Vec::new();
    let mut count = 0.0;
    for (k, &h) in tp.iter().enumerate() {
        if h {
            count += 1.0;
        }
        rec.push(count / n);
        prec.push(count / (k as f64 + 1.0));
    }
    match mode {
        Interpolation::AllPoint => {
            let mut mrec = vec![0.0];
            mrec.extend(&rec);
            mrec.push(1.0);
            let mut mpre = vec![0.0];
            mpre.extend(&prec);
            mpre.push(0.0);
            for i in (0..mpre.len() - 1).rev() {
                mpre[i] = mpre[i].max(mpre[i + 1]);
            }
            (0..mrec.len() - 1)
                .filter(|&i| mrec[i + 1] != mrec[i])
                .map(|i| (mrec[i + 1] - mrec[i]) * mpre[i + 1])
                .sum()
        }
        Interpolation::ElevenPoint => {
            (0..=10)
                .map(|t| {
                    let level = t as f64 / 10.0;
                    rec.iter()
                        .zip(&prec)
                        .filter(|(r, _)| **r >= level - 1e-12)
                        .map(|(_, p)| *p)
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / 11.0
        }
    }
}

fn grid_segment(rng: &mut impl Rng, lo: f64, hi: f64, min_cells: usize, max_cells: usize) -> (f64, f64) {
    let cells = ((hi - lo) / GRID) as usize;
    let len = rng.gen_range(min_cells..=max_cells.min(cells));
    let start = rng.gen_range(0..=cells - len);
    (lo + start as f64 * GRID, lo + (start + len) as f64 * GRID)
}

/// 1–20 ground truths in the unit window, possibly overlapping or repeated.
pub fn random_window_gt(rng: &mut impl Rng, num_classes: usize) -> Vec<ActionInstance> {
    let n = rng.gen_range(1..=20);
    let mut out: Vec<ActionInstance> = Vec::with_capacity(n);
    for _ in 0..n {
        if !out.is_empty() && rng.gen_bool(0.1) {
            let copy = out[rng.gen_range(0..out.len())];
            out.push(copy);
            continue;
        }
        let (start, end) = grid_segment(rng, 0.0, 1.0, 4, 256);
        out.push(ActionInstance {
            start,
            end,
            category: rng.gen_range(1..num_classes),
        });
    }
    out
}

/// Up to 20 detections over a few videos with coarse confidences so ties occur.
pub fn random_detections(rng: &mut impl Rng, videos: usize, categories: usize, span: f64) -> Vec<Detection> {
    let n = rng.gen_range(0..=20);
    (0..n)
        .map(|_| {
            let (start, end) = grid_segment(rng, 0.0, span, 8, 1024);
            Detection {
                video_id: format!("v{}", rng.gen_range(0..videos)),
                start,
                end,
                category: rng.gen_range(1..=categories),
                confidence: rng.gen_range(0..16) as f64 / 16.0,
            }
        })
        .collect()
}

/// Up to 20 ground-truth segments over the same videos as [`random_detections`].
pub fn random_gt_segments(rng: &mut impl Rng, videos: usize, span: f64) -> Vec<GroundTruthSegment> {
    let n = rng.gen_range(0..=20);
    (0..n)
        .map(|_| {
            let (start, end) = grid_segment(rng, 0.0, span, 8, 1024);
            GroundTruthSegment {
                video_id: format!("v{}", rng.gen_range(0..videos)),
                start,
                end,
            }
        })
        .collect()
}

/// Detections near some of the ground truths plus a few unrelated ones.
pub fn noisy_detections(rng: &mut impl Rng, gt: &[GroundTruthSegment]) -> Vec<Detection> {
    let mut out = Vec::new();
    for g in gt {
        for _ in 0..rng.gen_range(0..3) {
            let w = g.end - g.start;
            let start = g.start + rng.gen_range(-8..=8) as f64 * w / 32.0;
            let end = (g.end + rng.gen_range(-8..=8) as f64 * w / 32.0).max(start + GRID);
            out.push(Detection {
                video_id: g.video_id.clone(),
                start,
                end,
                category: 1,
                confidence: rng.gen_range(0..32) as f64 / 32.0,
            });
        }
    }
    for _ in 0..rng.gen_range(0..4) {
        let (start, end) = grid_segment(rng, 0.0, 24.0, 8, 1024);
        out.push(Detection {
            video_id: gt.first().map_or("v0".into(), |g| g.video_id.clone()),
            start,
            end,
            category: 1,
            confidence: rng.gen_range(0..32) as f64 / 32.0,
        });
    }
    out
}
