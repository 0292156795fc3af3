//! Per-category greedy non-maximum suppression.

use crate::data::Detection;
use crate::segment::Segment;

/// Ranking used by suppression: higher confidence, then earlier start, then
/// earlier position in the input.
pub(crate) fn rank(detections: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&detections[a], &detections[b]);
        y.confidence
            .total_cmp(&x.confidence)
            .then_with(|| x.start.total_cmp(&y.start))
            .then(a.cmp(&b))
    });
    order
}

/// Indices of the kept detections in rank order. A detection is dropped
/// when it overlaps an already kept one of the same category (and video)
/// with IoU above `threshold`.
pub fn nms(detections: &[Detection], threshold: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for i in rank(detections) {
        let d = &detections[i];
        let seg = Segment::new(d.start, d.end);
        let suppressed = kept.iter().any(|&j| {
            let k = &detections[j];
            k.category == d.category
                && k.video_id == d.video_id
                && seg.iou(&Segment::new(k.start, k.end)) > threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

/// Sorts detections by confidence, descending, with the same tie-break as NMS.
pub fn sort_by_confidence(detections: Vec<Detection>) -> Vec<Detection> {
    let order = rank(&detections);
    let mut slots: Vec<Option<Detection>> = detections.into_iter().map(Some).collect();
    order.into_iter().map(|i| slots[i].take().expect("each index once")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(start: f64, end: f64, category: usize, confidence: f64) -> Detection {
        Detection {
            video_id: "v".into(),
            start,
            end,
            category,
            confidence,
        }
    }

    #[test]
    fn suppresses_same_category() {
        // IoU of [0, 3) and [1, 4) is 0.5
        let d = vec![det(1.0, 4.0, 1, 0.8), det(0.0, 3.0, 1, 0.9)];
        assert_eq!(nms(&d, 0.1), vec![1]);
    }

    #[test]
    fn keeps_other_categories() {
        let d = vec![det(0.0, 10.0, 1, 0.9), det(0.0, 9.0, 2, 0.8)];
        assert_eq!(nms(&d, 0.1), vec![0, 1]);
    }

    #[test]
    fn ties_prefer_earlier_start_then_input_order() {
        let d = vec![det(2.0, 6.0, 1, 0.5), det(1.0, 5.0, 1, 0.5), det(1.0, 5.0, 1, 0.5)];
        assert_eq!(nms(&d, 0.1), vec![1]);
        let sorted = sort_by_confidence(d.clone());
        assert_eq!(sorted[0], d[1]);
    }

    #[test]
    fn duplicates_do_not_change_the_kept_set() {
        let d = vec![det(0.0, 4.0, 1, 0.9), det(10.0, 14.0, 1, 0.7), det(3.0, 8.0, 1, 0.6)];
        let mut doubled = d.clone();
        doubled.extend(d.clone());
        let kept: Vec<&Detection> = nms(&d, 0.1).into_iter().map(|i| &d[i]).collect();
        let kept2: Vec<&Detection> = nms(&doubled, 0.1).into_iter().map(|i| &doubled[i]).collect();
        assert_eq!(kept, kept2);
    }

    #[test]
    fn other_videos_do_not_suppress() {
        let mut b = det(0.0, 4.0, 1, 0.5);
        b.video_id = "w".into();
        assert_eq!(nms(&[det(0.0, 4.0, 1, 0.9), b], 0.1).len(), 2);
    }
}
