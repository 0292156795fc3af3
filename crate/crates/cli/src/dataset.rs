//! On-disk dataset layout: a manifest, one annotation file per split and one
//! SASF file per video.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssad::data::{load_annotations, load_sas_features, AnnotationSet, SasFeatureSequence};
use ssad::inference::ClassMap;
use ssad::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub annotations: String,
    pub videos: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    /// Action category names; detection class `k` is `categories[k - 1]`.
    pub categories: Vec<String>,
    pub blocks: Vec<BlockSpec>,
    /// Column inside every block for each detection class, background first.
    pub class_map: Vec<Option<usize>>,
    pub features_dir: String,
    pub splits: BTreeMap<String, SplitSpec>,
}

impl Manifest {
    pub fn input_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.width).sum()
    }

    /// Classification width: action categories plus background.
    pub fn num_classes(&self) -> usize {
        self.categories.len() + 1
    }

    pub fn class_map(&self) -> ClassMap {
        ClassMap::new(self.class_map.clone())
    }
}

pub struct Split {
    pub manifest: Manifest,
    pub annotations: AnnotationSet,
    pub features: Vec<SasFeatureSequence>,
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::Usage(format!("no dataset manifest at {}", path.display())));
    }
    let source = path.display().to_string();
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Load {
        source_name: source.clone(),
        message: e.to_string(),
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Load {
        source_name: source.clone(),
        message: e.to_string(),
    })?;
    if manifest.class_map.len() != manifest.num_classes() {
        return Err(Error::Load {
            source_name: source,
            message: format!(
                "class map has {} entries for {} classes",
                manifest.class_map.len(),
                manifest.num_classes()
            ),
        });
    }
    Ok(manifest)
}

fn feature_path(dir: &Path, manifest: &Manifest, id: &str) -> PathBuf {
    dir.join(&manifest.features_dir).join(format!("{id}.sasf"))
}

/// Loads and cross-checks one split: annotations, then every feature file.
pub fn load_split(dir: &Path, split: &str) -> Result<Split> {
    let manifest = load_manifest(dir)?;
    let spec = manifest.splits.get(split).ok_or_else(|| {
        Error::Usage(format!(
            "dataset has no split '{split}' (available: {})",
            manifest.splits.keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let ann_path = dir.join(&spec.annotations);
    let annotations = load_annotations(&ann_path)?;
    if annotations.categories != manifest.categories {
        return Err(Error::Load {
            source_name: ann_path.display().to_string(),
            message: "categories differ from the manifest".into(),
        });
    }
    let mut features = Vec::with_capacity(annotations.videos.len());
    for video in &annotations.videos {
        let path = feature_path(dir, &manifest, &video.id);
        let seq = load_sas_features(&path)?;
        let source = path.display().to_string();
        if seq.num_snippets() != video.num_snippets {
            return Err(Error::Load {
                source_name: source,
                message: format!(
                    "{} snippets but the annotations say {}",
                    seq.num_snippets(),
                    video.num_snippets
                ),
            });
        }
        let widths: Vec<usize> = seq.blocks().iter().map(|b| b.width).collect();
        let expected: Vec<usize> = manifest.blocks.iter().map(|b| b.width).collect();
        if widths != expected {
            return Err(Error::Load {
                source_name: source,
                message: format!("block widths {widths:?} differ from the manifest's {expected:?}"),
            });
        }
        features.push(seq);
    }
    Ok(Split {
        manifest,
        annotations,
        features,
    })
}
