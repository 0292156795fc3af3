//! Whole-video prediction over sliding windows.

use super::fusion::{fuse, mean_sas, ClassMap, FusionConfig};
use super::nms::{nms, sort_by_confidence};
use crate::data::{slide_windows, Detection, SasFeatureSequence, WindowConfig};
use crate::error::{Error, Result};
use crate::model::Network;

/// Fused candidates from every prediction window, clipped to the video, before
/// suppression. Candidates that fall entirely outside the video are dropped.
pub fn video_candidates(
    seq: &SasFeatureSequence,
    network: &Network,
    fusion: &FusionConfig,
    map: &ClassMap,
) -> Result<Vec<Detection>> {
    fusion.validate()?;
    let cfg = network.config();
    if seq.dim() != cfg.input_dim {
        return Err(Error::usage(format!(
            "'{}' has feature dimension {}, network expects {}",
            seq.video_id(),
            seq.dim(),
            cfg.input_dim
        )));
    }
    if map.num_classes() != cfg.num_classes {
        return Err(Error::usage(format!(
            "class map covers {} classes, network predicts {}",
            map.num_classes(),
            cfg.num_classes
        )));
    }
    map.check(seq)?;
    let t_v = seq.num_snippets() as f64;
    let len = cfg.window_len as f64;
    let mut out = Vec::new();
    for window in slide_windows(seq, &[], &WindowConfig::prediction(cfg.window_len))? {
        let output = network.forward(&window.features)?;
        for inst in network.decode(&output) {
            let start = (window.start as f64 + inst.start() * len).max(0.0);
            let end = (window.start as f64 + inst.end() * len).min(t_v);
            if !(end > start) {
                continue;
            }
            let p_sas = mean_sas(seq, start, end, map);
            let fused = fuse(&inst, &p_sas, fusion);
            let score = fused.fused.as_ref().expect("fused");
            if fusion.background_suppression && score.scores[0] > score.confidence {
                continue;
            }
            out.push(Detection {
                video_id: seq.video_id().to_string(),
                start,
                end,
                category: score.category,
                confidence: score.confidence,
            });
        }
    }
    Ok(out)
}

/// Final detections for one video, sorted by confidence.
pub fn predict_video(
    seq: &SasFeatureSequence,
    network: &Network,
    fusion: &FusionConfig,
    map: &ClassMap,
) -> Result<Vec<Detection>> {
    let candidates = video_candidates(seq, network, fusion, map)?;
    let kept = nms(&candidates, fusion.nms_threshold);
    let mut slots: Vec<Option<Detection>> = candidates.into_iter().map(Some).collect();
    let kept = kept.into_iter().map(|i| slots[i].take().expect("kept once")).collect();
    Ok(sort_by_confidence(kept))
}

/// Predictions for several videos, concatenated in input order.
pub fn predict_all(
    sequences: &[SasFeatureSequence],
    network: &Network,
    fusion: &FusionConfig,
    map: Option<&ClassMap>,
) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for seq in sequences {
        let identity;
        let map = match map {
            Some(m) => m,
            None => {
                identity = ClassMap::for_sequence(seq, network.config().num_classes)?;
                &identity
            }
        };
        out.extend(predict_video(seq, network, fusion, map)?);
    }
    Ok(out)
}
