//! Synthetic scene generation, spinning-LiDAR raycasting, per-camera semantic
//! rendering, and the on-disk frame format. Scenes carry labeled target boxes
//! plus unlabeled clutter boxes: clutter returns LiDAR points like any other
//! solid object but renders as background in the semantic images, so telling
//! the two apart requires correctly registered camera features.

mod dataset;
mod lidar;
mod render;
mod scene;

pub use dataset::{list_frames, read_frame, write_frame, FrameData};
pub use lidar::{raycast_lidar, LidarModel, LidarPoint, PointCloud};
pub use render::{default_rig, render_semantic_image, SemanticImage};
pub use scene::{generate_scene, Scene, SceneConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error(
        "box placement rejected {attempts} times; lower the box density or shrink the sizes"
    )]
    RejectionBudget { attempts: usize },
    #[error(transparent)]
    Geom(#[from] bevbench_geom::GeomError),
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed frame file {path}: {message}")]
    Malformed { path: String, message: String },
}
