//! Videos, annotations, snippet-level score sequences and their file formats.
//!
//! All times are in snippet units (one row of the feature matrix per snippet).

mod annotations;
mod predictions;
mod sasf;
mod synth;
mod windows;

pub use annotations::{load_annotations, save_annotations, ActionInstance, AnnotationSet, VideoAnnotation};
pub use predictions::{load_predictions, save_predictions, Detection};
pub use sasf::{load_sas_features, save_sas_features, FeatureBlock, SasFeatureSequence, SASF_MAGIC, SASF_VERSION};
pub use synth::{synth_generate, synth_split, SynthConfig, SynthDataset};
pub use windows::{shuffle_training_set, slide_windows, window_starts, Window, WindowConfig};

use std::path::Path;

use crate::error::Result;

/// Writes `bytes` to `path` through a sibling temporary file so a failed run
/// never leaves a truncated output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{file_name}.partial"));
    std::fs::write(&tmp, bytes)?;
    if let Err(e) = std::fs::rename(&tmp, path) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}
