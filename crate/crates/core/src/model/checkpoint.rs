//! Binary checkpoint: magic, version, length-prefixed JSON config, then each
//! parameter as (u16 name length, name, u32 count, f64 values), little endian.

use std::path::Path;

use super::{Network, NetworkConfig};
use crate::data::write_atomic;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SSADCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

impl Network {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let config = serde_json::to_vec(self.config()).expect("network config serializes");
        let mut out = Vec::with_capacity(16 + config.len() + self.num_parameters() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);
        for p in self.parameters() {
            let name = p.name().as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(p.value().len() as u32).to_le_bytes());
            for v in p.value().data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8], source: &str) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, source };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(r.error(0, "bad magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.error(8, &format!("unsupported version {version}")));
        }
        let len = r.u32()? as usize;
        let at = r.pos;
        let config: NetworkConfig =
            serde_json::from_slice(r.take(len)?).map_err(|e| r.error(at, &format!("config: {e}")))?;
        let mut net = Network::with_zero_parameters(config)?;
        for p in net.parameters_mut() {
            let at = r.pos;
            let name_len = r.u16()? as usize;
            let name = r.take(name_len)?;
            if name != p.name().as_bytes() {
                return Err(r.error(
                    at,
                    &format!("expected parameter '{}', found '{}'", p.name(), String::from_utf8_lossy(name)),
                ));
            }
            let count = r.u32()? as usize;
            if count != p.value().len() {
                return Err(r.error(
                    at,
                    &format!("parameter '{}' has {count} values, expected {}", p.name(), p.value().len()),
                ));
            }
            let at = r.pos;
            for (i, slot) in p.value_mut().data_mut().iter_mut().enumerate() {
                let v = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
                if !v.is_finite() {
                    return Err(r.error(at + 8 * i, "non-finite parameter value"));
                }
                *slot = v;
            }
        }
        if r.pos != bytes.len() {
            return Err(r.error(r.pos, "trailing bytes"));
        }
        Ok(net)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Reader<'a> {
    fn error(&self, offset: usize, msg: &str) -> Error {
        Error::load(self.source, format!("{msg} at byte offset {offset}"))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(self.pos, "truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn save_checkpoint(path: &Path, network: &Network) -> Result<()> {
    write_atomic(path, &network.to_checkpoint_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let bytes = std::fs::read(path).map_err(|e| Error::load(path.display().to_string(), e.to_string()))?;
    Network::from_checkpoint_bytes(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaseLayers, LayerSpec};

    fn small() -> Network {
        let mut cfg = NetworkConfig::new(4, 3);
        cfg.window_len = 64;
        cfg.base = BaseLayers::Custom(vec![LayerSpec::conv(3, 2, 3); 4]);
        cfg.anchor_filters = 4;
        Network::build(cfg, 5).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let net = small();
        let bytes = net.to_checkpoint_bytes();
        assert_eq!(&bytes[..8], b"SSADCKPT");
        let back = Network::from_checkpoint_bytes(&bytes, "mem").unwrap();
        assert_eq!(back.config(), net.config());
        for (a, b) in net.parameters().iter().zip(back.parameters()) {
            assert_eq!(a.name(), b.name());
            assert_eq!(a.value(), b.value());
        }
        assert_eq!(back.to_checkpoint_bytes(), bytes);
    }

    #[test]
    fn truncation_and_trailing_bytes_rejected() {
        let bytes = small().to_checkpoint_bytes();
        for cut in [0, 7, 12, 20, bytes.len() - 1] {
            let err = Network::from_checkpoint_bytes(&bytes[..cut], "mem").unwrap_err();
            assert!(matches!(err, Error::Load { .. }), "cut {cut}: {err}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Network::from_checkpoint_bytes(&extra, "mem").unwrap_err().to_string().contains("trailing"));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let net = small();
        save_checkpoint(&path, &net).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap().to_checkpoint_bytes(), net.to_checkpoint_bytes());
    }
}
