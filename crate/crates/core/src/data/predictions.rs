use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};

/// A final detection in video snippet coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub video_id: String,
    pub start: f64,
    pub end: f64,
    pub category: usize,
    pub confidence: f64,
}

pub fn load_predictions(path: &Path) -> Result<Vec<Detection>> {
    let source = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::load(&source, e.to_string()))?;
    let detections: Vec<Detection> = serde_json::from_str(&text).map_err(|e| Error::load(&source, e.to_string()))?;
    for (i, d) in detections.iter().enumerate() {
        if !(d.start.is_finite() && d.end.is_finite() && d.confidence.is_finite()) || d.end <= d.start {
            return Err(Error::load(&source, format!("prediction {i} has an invalid segment or confidence")));
        }
    }
    Ok(detections)
}

pub fn save_predictions(path: &Path, detections: &[Detection]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(detections).map_err(|e| Error::usage(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
