//! Anchor assignment, hard negative mining, the detection loss and the
//! training loop.

mod loss;
mod matching;
mod mining;
mod trainer;

pub use loss::{
    classification_loss, detection_loss, l2_penalty, location_loss, overlap_loss, smooth_l1, total_loss, LossBreakdown,
    LossTerm, LossWeights,
};
pub use matching::{match_anchors, unmatched_ground_truth, MatchedAnchor, POSITIVE_IOU};
pub use mining::{hard_negative_mine, Selection, HARD_NEGATIVE_OVERLAP};
pub use trainer::{
    prepare_windows, EpochRecord, LossObjective, PreparedWindow, TrainConfig, Trainer, DIVERGENCE_LIMIT,
};
