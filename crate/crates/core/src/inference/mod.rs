//! Whole-video prediction: window sweep, score fusion and suppression.

mod fusion;
mod nms;
mod predict;

pub use fusion::{fuse, fuse_scores, mean_sas, ClassMap, FusionConfig};
pub use nms::{nms, sort_by_confidence};
pub(crate) use nms::rank;
pub use predict::{predict_all, predict_video, video_candidates};
