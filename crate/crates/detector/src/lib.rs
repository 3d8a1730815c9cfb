//! Toy end-to-end BEV detector: a pillar-style LiDAR branch, a camera
//! lift branch, a pluggable fusion step, a dense anchor head, and the
//! training loop used by the robustness sweep.
//!
//! Both branches rasterize onto the same ground-plane grid, so a corrupted
//! camera calibration shifts the camera features in BEV while the LiDAR
//! features stay put; the fusion step in the middle is the component under
//! study and everything around it is deliberately small and deterministic.

mod config;
mod decode;
mod features;
mod head;
mod loss;
mod targets;
mod train;

pub use config::DetectorConfig;
pub use decode::{decode_detections, detect_frame, rotated_nms};
pub use features::{lift_camera_to_bev, pillarize, stack_batch, PILLAR_CHANNELS};
pub use head::{build_model, DetectorModel, HeadConfig, ANCHORS_PER_CELL, REG_CHANNELS};
pub use loss::detection_loss;
pub use targets::{decode_cell, encode_box, encode_targets, AnchorSpec, Targets};
pub use train::{history_text, train, HistoryRow, TrainSchedule, TrainedDetector};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("bad detector input: {0}")]
    Input(String),
    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },
    #[error(transparent)]
    Fusion(#[from] bevbench_fusion::FusionError),
    #[error(transparent)]
    Tensor(#[from] bevbench_tensor::TensorError),
    #[error(transparent)]
    Corrupt(#[from] bevbench_corrupt::CorruptError),
}
