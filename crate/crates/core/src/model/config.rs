use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{conv1d_output_len, Padding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    MaxPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    /// Output channels; ignored for pooling.
    #[serde(default)]
    pub filters: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv(kernel: usize, stride: usize, filters: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            kernel,
            stride,
            filters,
            activation: Activation::Relu,
        }
    }

    pub fn maxpool(kernel: usize, stride: usize) -> Self {
        Self {
            kind: LayerKind::MaxPool,
            kernel,
            stride,
            filters: 0,
            activation: Activation::None,
        }
    }
}

/// Base-layer presets. Every preset reduces the input length by 16.
///
/// `B` is the reference stack: four stages of a kernel-9 convolution followed
/// by 2/2 max pooling. The others vary one axis each: `A` shortens with
/// strided convolutions instead of pooling, `C` and `D` use kernel 3 and 15,
/// and `E` doubles the convolutions per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseArch {
    A,
    B,
    C,
    D,
    E,
}

impl BaseArch {
    pub fn layers(self, filters: usize) -> Vec<LayerSpec> {
        let pooled = |kernel: usize, convs: usize| {
            (0..4)
                .flat_map(|_| {
                    let mut stage = vec![LayerSpec::conv(kernel, 1, filters); convs];
                    stage.push(LayerSpec::maxpool(2, 2));
                    stage
                })
                .collect()
        };
        match self {
            BaseArch::A => vec![LayerSpec::conv(9, 2, filters); 4],
            BaseArch::B => pooled(9, 1),
            BaseArch::C => pooled(3, 1),
            BaseArch::D => pooled(15, 1),
            BaseArch::E => pooled(9, 2),
        }
    }
}

impl std::str::FromStr for BaseArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(BaseArch::A),
            "B" => Ok(BaseArch::B),
            "C" => Ok(BaseArch::C),
            "D" => Ok(BaseArch::D),
            "E" => Ok(BaseArch::E),
            other => Err(Error::config(format!("unknown base architecture '{other}', expected A..E"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseLayers {
    Preset(BaseArch),
    Custom(Vec<LayerSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub window_len: usize,
    pub input_dim: usize,
    pub base: BaseLayers,
    pub base_filters: usize,
    pub anchor_filters: usize,
    pub anchor_kernel: usize,
    pub prediction_kernel: usize,
    /// One ratio set per anchor layer; the number of sets fixes the number of
    /// anchor layers.
    pub ratios: Vec<Vec<f64>>,
    /// Classification width `K'`: action categories plus background.
    pub num_classes: usize,
    pub alpha_center: f64,
    pub alpha_width: f64,
}

pub const BASE_STRIDE: usize = 16;

impl NetworkConfig {
    pub fn new(input_dim: usize, num_classes: usize) -> Self {
        Self {
            window_len: 512,
            input_dim,
            base: BaseLayers::Preset(BaseArch::B),
            base_filters: 256,
            anchor_filters: 512,
            anchor_kernel: 3,
            prediction_kernel: 3,
            ratios: vec![
                vec![1.0, 1.5, 2.0],
                vec![0.5, 0.75, 1.0, 1.5, 2.0],
                vec![0.5, 0.75, 1.0, 1.5, 2.0],
            ],
            num_classes,
            alpha_center: 0.1,
            alpha_width: 0.1,
        }
    }

    pub fn base_layers(&self) -> Vec<LayerSpec> {
        match &self.base {
            BaseLayers::Preset(arch) => arch.layers(self.base_filters),
            BaseLayers::Custom(layers) => layers.clone(),
        }
    }

    /// Width of one anchor's raw prediction vector.
    pub fn prediction_width(&self) -> usize {
        self.num_classes + 3
    }

    /// Temporal length after the base layers, then after each anchor layer.
    pub fn map_lengths(&self) -> Result<(usize, Vec<usize>)> {
        let mut len = self.window_len;
        for l in self.base_layers() {
            len = conv1d_output_len(len, l.kernel, l.stride, Padding::Same)?;
        }
        let base = len;
        let mut maps = Vec::with_capacity(self.ratios.len());
        for _ in &self.ratios {
            len = conv1d_output_len(len, self.anchor_kernel, 2, Padding::Same)?;
            maps.push(len);
        }
        Ok((base, maps))
    }

    pub fn anchors_per_window(&self) -> Result<usize> {
        let (_, maps) = self.map_lengths()?;
        Ok(maps.iter().zip(&self.ratios).map(|(m, r)| m * r.len()).sum())
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.input_dim == 0 {
            return Err(Error::config("window length and input dimension must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("need at least one action class plus background"));
        }
        if self.anchor_filters == 0 || self.anchor_kernel == 0 || self.prediction_kernel == 0 {
            return Err(Error::config("anchor and prediction layers need positive sizes"));
        }
        if self.ratios.is_empty() {
            return Err(Error::config("at least one anchor layer is required"));
        }
        for (i, set) in self.ratios.iter().enumerate() {
            if set.is_empty() || set.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(Error::config(format!("ratio set {i} must be non-empty and positive")));
            }
        }
        if !(self.alpha_center.is_finite() && self.alpha_width.is_finite()) {
            return Err(Error::config("offset scales must be finite"));
        }
        let layers = self.base_layers();
        for (i, l) in layers.iter().enumerate() {
            if l.kernel < 1 || !(l.stride == 1 || l.stride == 2) {
                return Err(Error::config(format!(
                    "base layer {i}: kernel must be >= 1 and stride 1 or 2, got {}/{}",
                    l.kernel, l.stride
                )));
            }
            if l.kind == LayerKind::Conv && l.filters == 0 {
                return Err(Error::config(format!("base layer {i}: convolution needs filters")));
            }
        }
        let product: usize = layers.iter().map(|l| l.stride).product();
        if product != BASE_STRIDE {
            let (base, maps) = self.map_lengths()?;
            return Err(Error::config(format!(
                "base layers reduce length by {product}, need {BASE_STRIDE}; \
                 achieved base length {base} and anchor map lengths {maps:?} for window {}",
                self.window_len
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_lengths() {
        let cfg = NetworkConfig::new(303, 21);
        cfg.validate().unwrap();
        let (base, maps) = cfg.map_lengths().unwrap();
        assert_eq!(base, 32);
        assert_eq!(maps, vec![16, 8, 4]);
        assert_eq!(cfg.anchors_per_window().unwrap(), 108);
    }

    #[test]
    fn every_preset_reduces_by_sixteen() {
        for arch in [BaseArch::A, BaseArch::B, BaseArch::C, BaseArch::D, BaseArch::E] {
            let mut cfg = NetworkConfig::new(12, 4);
            cfg.base = BaseLayers::Preset(arch);
            cfg.validate().unwrap();
            assert_eq!(cfg.map_lengths().unwrap().1, vec![16, 8, 4], "{arch:?}");
        }
    }

    #[test]
    fn stride_product_eight_rejected_with_lengths() {
        let mut cfg = NetworkConfig::new(12, 4);
        cfg.base = BaseLayers::Custom(vec![LayerSpec::conv(3, 2, 8); 3]);
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("[32, 16, 8]"), "{msg}");
    }

    #[test]
    fn json_round_trip() {
        let cfg = NetworkConfig::new(9, 3);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<NetworkConfig>(&text).unwrap(), cfg);
        assert_eq!("c".parse::<BaseArch>().unwrap(), BaseArch::C);
        assert!("F".parse::<BaseArch>().is_err());
    }
}
