use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::error::{Error, Result};

/// One labelled action: `[start, end)` in snippets, category in `1..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionInstance {
    pub start: f64,
    pub end: f64,
    pub category: usize,
}

impl ActionInstance {
    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAnnotation {
    pub id: String,
    pub num_snippets: usize,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub instances: Vec<ActionInstance>,
}

fn default_fps() -> f64 {
    25.0
}

/// Contents of an annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub videos: Vec<VideoAnnotation>,
    pub categories: Vec<String>,
}

impl AnnotationSet {
    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn validate(&self, source: &str) -> Result<()> {
        let k = self.categories.len();
        let mut seen = std::collections::HashSet::new();
        for video in &self.videos {
            if !seen.insert(video.id.as_str()) {
                return Err(Error::load(source, format!("duplicate video id '{}'", video.id)));
            }
            if video.num_snippets == 0 {
                return Err(Error::load(source, format!("video '{}' has zero snippets", video.id)));
            }
            for (i, inst) in video.instances.iter().enumerate() {
                let at = format!("video '{}' instance {i}", video.id);
                if !(inst.start.is_finite() && inst.end.is_finite()) {
                    return Err(Error::load(source, format!("{at}: non-finite bounds")));
                }
                if inst.start < 0.0 || inst.end <= inst.start {
                    return Err(Error::load(
                        source,
                        format!("{at}: need 0 <= start < end, got [{}, {}]", inst.start, inst.end),
                    ));
                }
                if inst.end > video.num_snippets as f64 {
                    return Err(Error::load(
                        source,
                        format!("{at}: end {} exceeds video length {}", inst.end, video.num_snippets),
                    ));
                }
                if inst.category < 1 || inst.category > k {
                    return Err(Error::load(
                        source,
                        format!("{at}: category {} outside 1..={k}", inst.category),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn video(&self, id: &str) -> Option<&VideoAnnotation> {
        self.videos.iter().find(|v| v.id == id)
    }
}

pub fn load_annotations(path: &Path) -> Result<AnnotationSet> {
    let source = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::load(&source, e.to_string()))?;
    let set: AnnotationSet = serde_json::from_str(&text).map_err(|e| Error::load(&source, e.to_string()))?;
    set.validate(&source)?;
    Ok(set)
}

pub fn save_annotations(path: &Path, set: &AnnotationSet) -> Result<()> {
    let mut text = serde_json::to_string_pretty(set).map_err(|e| Error::usage(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AnnotationSet {
        AnnotationSet {
            videos: vec![
                VideoAnnotation {
                    id: "a".into(),
                    num_snippets: 100,
                    fps: 25.0,
                    instances: vec![ActionInstance {
                        start: 10.0,
                        end: 42.5,
                        category: 2,
                    }],
                },
                VideoAnnotation {
                    id: "background".into(),
                    num_snippets: 30,
                    fps: 25.0,
                    instances: vec![],
                },
            ],
            categories: vec!["jump".into(), "run".into()],
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.json");
        save_annotations(&path, &sample()).unwrap();
        assert_eq!(load_annotations(&path).unwrap(), sample());
    }

    #[test]
    fn background_only_video_is_valid() {
        sample().validate("mem").unwrap();
    }

    #[test]
    fn invariant_violations_name_the_record() {
        let mut s = sample();
        s.videos[0].instances[0].end = 101.0;
        let err = s.validate("mem").unwrap_err().to_string();
        assert!(err.contains("video 'a' instance 0"), "{err}");

        let mut s = sample();
        s.videos[0].instances[0].category = 3;
        assert!(matches!(s.validate("mem"), Err(Error::Load { .. })));

        let mut s = sample();
        s.videos[0].instances[0].end = 10.0;
        assert!(s.validate("mem").is_err());
    }

    #[test]
    fn malformed_json_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"videos\": [").unwrap();
        assert!(matches!(load_annotations(&path), Err(Error::Load { .. })));
    }
}
