//! Hard negative mining within one window.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MatchedAnchor;

/// Predicted overlap above which a negative counts as hard.
pub const HARD_NEGATIVE_OVERLAP: f64 = 0.5;

/// Anchor indices (into the matched list) that enter the loss.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl Selection {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.positives.iter().chain(&self.negatives).copied()
    }
}

/// Keeps every positive and every hard negative, then tops the negatives up
/// with seeded easy negatives until they number `ratio` times the positives.
///
/// A window without positives keeps a single random negative.
pub fn hard_negative_mine(matched: &[MatchedAnchor], overlap: &[f64], ratio: f64, seed: u64) -> Selection {
    debug_assert_eq!(matched.len(), overlap.len());
    let positives: Vec<usize> = (0..matched.len()).filter(|&i| matched[i].is_positive()).collect();
    let (hard, easy): (Vec<usize>, Vec<usize>) = (0..matched.len())
        .filter(|&i| !matched[i].is_positive())
        .partition(|&i| overlap[i] > HARD_NEGATIVE_OVERLAP);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if positives.is_empty() {
        let all: Vec<usize> = (0..matched.len()).collect();
        let negatives = if all.is_empty() {
            Vec::new()
        } else {
            log::warn!("window has no positive anchors; keeping one random negative");
            vec![all[sample(&mut rng, all.len(), 1).index(0)]]
        };
        return Selection { positives, negatives };
    }

    let target = (ratio * positives.len() as f64).round() as usize;
    let mut negatives = hard;
    if negatives.len() < target {
        let extra = (target - negatives.len()).min(easy.len());
        negatives.extend(sample(&mut rng, easy.len(), extra).into_iter().map(|i| easy[i]));
        negatives.sort_unstable();
    }
    Selection { positives, negatives }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matched(categories: &[usize]) -> Vec<MatchedAnchor> {
        categories
            .iter()
            .enumerate()
            .map(|(i, &c)| MatchedAnchor {
                anchor: i,
                category: c,
                iou: if c > 0 { 0.8 } else { 0.1 },
                target_center: 0.5,
                target_width: 0.2,
                ground_truth: 0,
            })
            .collect()
    }

    #[test]
    fn tops_up_with_easy_negatives() {
        let m = matched(&[1, 1, 0, 0, 0, 0, 0]);
        let over = [0.9, 0.9, 0.7, 0.1, 0.2, 0.3, 0.4];
        let s = hard_negative_mine(&m, &over, 1.0, 3);
        assert_eq!(s.positives, vec![0, 1]);
        assert_eq!(s.negatives.len(), 2);
        assert!(s.negatives.contains(&2));
    }

    #[test]
    fn keeps_all_hard_negatives() {
        let m = matched(&[1, 1, 0, 0, 0, 0, 0, 0]);
        let over = [0.9, 0.9, 0.6, 0.7, 0.8, 0.9, 0.95, 0.1];
        let s = hard_negative_mine(&m, &over, 1.0, 3);
        assert_eq!(s.negatives, vec![2, 3, 4, 5, 6]);
        assert_eq!(s.len(), 7);
    }

    #[test]
    fn seeded_and_reproducible() {
        let m = matched(&[1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let over = vec![0.0; 12];
        let a = hard_negative_mine(&m, &over, 1.0, 42);
        assert_eq!(a, hard_negative_mine(&m, &over, 1.0, 42));
        let differs = (0..20).any(|s| hard_negative_mine(&m, &over, 1.0, s) != a);
        assert!(differs);
    }

    #[test]
    fn no_positives_keeps_one_negative() {
        let m = matched(&[0, 0, 0]);
        let s = hard_negative_mine(&m, &[0.9, 0.9, 0.9], 1.0, 0);
        assert!(s.positives.is_empty());
        assert_eq!(s.negatives.len(), 1);
        assert!(hard_negative_mine(&[], &[], 1.0, 0).is_empty());
    }

    #[test]
    fn few_easy_negatives_caps_the_fill() {
        let m = matched(&[1, 1, 1, 0]);
        let s = hard_negative_mine(&m, &[0.9, 0.9, 0.9, 0.1], 1.0, 0);
        assert_eq!(s.negatives, vec![3]);
    }
}
