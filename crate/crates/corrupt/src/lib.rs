//! Evaluation-time sensor corruptions: LiDAR beam reduction, point dropout,
//! and camera extrinsic misalignment.
//!
//! Every corruption is a pure function of the input frame and a
//! [`CorruptionSpec`], so corrupted datasets can be regenerated bit for bit
//! from the original data plus the spec. Randomized corruptions derive their
//! streams from `(global_seed, frame_key, stage_tag)`, which makes the output
//! independent of frame processing order and worker count.

mod apply;
mod ops;
mod spec;

pub use apply::{
    apply, corrupt_dataset, misalignment_tag, read_manifest, CorruptionManifest, MANIFEST_FILE,
    POINT_REDUCTION_TAG,
};
pub use ops::{
    kept_rings, kept_rings_nested, perturb_extrinsic, reduce_points, remove_layers,
    remove_layers_nested,
};
pub use spec::{CorruptionKind, CorruptionSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorruptError {
    #[error("invalid corruption spec: {0}")]
    InvalidSpec(String),
    #[error("layer removal target {target} exceeds the {source_layers} source layers")]
    TooManyLayers { source_layers: usize, target: usize },
    #[error("point has ring {ring} but the sensor only has {source_layers} layers")]
    RingOutOfRange { ring: u16, source_layers: usize },
    #[error(transparent)]
    Geom(#[from] bevbench_geom::GeomError),
    #[error(transparent)]
    Sim(#[from] bevbench_sim::SimError),
    #[error("failed to encode manifest: {0}")]
    ManifestEncode(#[from] toml::ser::Error),
    #[error("failed to decode manifest: {0}")]
    ManifestDecode(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
