//! SASF: binary container for one video's snippet-level action scores.
//!
//! Little-endian layout:
//!
//! ```text
//! "SASF"            4 bytes
//! version           u32 (= 1)
//! T                 u32   snippets
//! D                 u32   feature width
//! block_count       u32
//! per block:        u16 name length, UTF-8 name, u32 width
//! payload           T·D f32, row-major
//! ```
//!
//! Trailing bytes are rejected.

use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};

pub const SASF_MAGIC: &[u8; 4] = b"SASF";
pub const SASF_VERSION: u32 = 1;

/// A contiguous column range holding one upstream classifier's scores.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureBlock {
    pub name: String,
    pub offset: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SasFeatureSequence {
    video_id: String,
    num_snippets: usize,
    blocks: Vec<FeatureBlock>,
    values: Vec<f32>,
}

impl SasFeatureSequence {
    /// `blocks` are `(name, width)` pairs laid out left to right.
    pub fn new(
        video_id: impl Into<String>,
        num_snippets: usize,
        blocks: &[(String, usize)],
        values: Vec<f32>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        if num_snippets == 0 {
            return Err(Error::config(format!("feature sequence '{video_id}' has no snippets")));
        }
        if blocks.is_empty() || blocks.iter().any(|(_, w)| *w == 0) {
            return Err(Error::config(format!("feature sequence '{video_id}' needs non-empty blocks")));
        }
        let mut layout = Vec::with_capacity(blocks.len());
        let mut offset = 0;
        for (name, width) in blocks {
            layout.push(FeatureBlock {
                name: name.clone(),
                offset,
                width: *width,
            });
            offset += width;
        }
        if values.len() != num_snippets * offset {
            return Err(Error::config(format!(
                "feature sequence '{video_id}' expects {}×{offset} values, got {}",
                num_snippets,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "feature sequence '{video_id}' has a non-finite value at row {}",
                i / offset
            )));
        }
        Ok(Self {
            video_id,
            num_snippets,
            blocks: layout,
            values,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn num_snippets(&self) -> usize {
        self.num_snippets
    }

    /// Total feature width `D`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.width).sum()
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[f32] {
        let d = self.dim();
        &self.values[t * d..(t + 1) * d]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.values.len() * 4);
        out.extend_from_slice(SASF_MAGIC);
        out.extend_from_slice(&SASF_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.num_snippets as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&(b.name.len() as u16).to_le_bytes());
            out.extend_from_slice(b.name.as_bytes());
            out.extend_from_slice(&(b.width as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(video_id: impl Into<String>, bytes: &[u8], source: &str) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, source };
        let magic = r.take(4)?;
        if magic != SASF_MAGIC {
            return Err(r.error_at(0, "bad magic, expected \"SASF\""));
        }
        let version = r.u32()?;
        if version != SASF_VERSION {
            return Err(r.error_at(4, format!("unsupported version {version}")));
        }
        let t = r.u32()? as usize;
        let d = r.u32()? as usize;
        let block_count = r.u32()? as usize;
        if t == 0 || d == 0 || block_count == 0 {
            return Err(r.error_at(8, format!("empty header: T={t} D={d} blocks={block_count}")));
        }
        let mut blocks = Vec::with_capacity(block_count.min(1024));
        for _ in 0..block_count {
            let at = r.pos;
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.error_at(at, "block name is not UTF-8"))?
                .to_string();
            let width = r.u32()? as usize;
            if width == 0 {
                return Err(r.error_at(at, format!("block '{name}' has zero width")));
            }
            blocks.push((name, width));
        }
        let total: usize = blocks.iter().map(|(_, w)| w).sum();
        if total != d {
            return Err(r.error_at(r.pos, format!("block widths sum to {total}, header says D={d}")));
        }
        let payload_start = r.pos;
        let needed = t
            .checked_mul(d)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| r.error_at(8, "payload size overflows"))?;
        let remaining = bytes.len() - payload_start;
        if remaining < needed {
            return Err(r.error_at(
                bytes.len(),
                format!("truncated payload: need {needed} bytes, found {remaining}"),
            ));
        }
        if remaining > needed {
            return Err(r.error_at(payload_start + needed, "trailing bytes after payload"));
        }
        let mut values = Vec::with_capacity(t * d);
        for (i, chunk) in bytes[payload_start..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(r.error_at(payload_start + 4 * i, "non-finite value"));
            }
            values.push(v);
        }
        Self::new(video_id, t, &blocks, values).map_err(|e| Error::load(source, e.to_string()))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, msg: impl std::fmt::Display) -> Error {
        Error::load(self.source, format!("byte offset {offset}: {msg}"))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error_at(self.pos, format!("unexpected end of file reading {n} bytes")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Loads a SASF file; the video id is the file stem.
pub fn load_sas_features(path: &Path) -> Result<SasFeatureSequence> {
    let source = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::load(&source, e.to_string()))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    SasFeatureSequence::from_bytes(id, &bytes, &source)
}

pub fn save_sas_features(path: &Path, seq: &SasFeatureSequence) -> Result<()> {
    write_atomic(path, &seq.to_bytes())
}
