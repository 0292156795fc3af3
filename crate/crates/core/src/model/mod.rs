//! Network configuration, anchor geometry, the detector network and its
//! checkpoint format.

mod anchors;
mod checkpoint;
mod config;
mod network;

pub use anchors::{
    anchor_grid, decode_anchor, AnchorGeometry, FusedScore, PredictionInstance, RawPrediction, MAX_WIDTH_OFFSET,
};
pub(crate) use anchors::decode_location;
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Activation, BaseArch, BaseLayers, LayerKind, LayerSpec, NetworkConfig, BASE_STRIDE};
pub use network::{ForwardTrace, Network, SsadOutput};
