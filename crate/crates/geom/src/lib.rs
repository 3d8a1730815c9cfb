//! Geometric substrate for the benchmark: rigid transforms, pinhole cameras,
//! oriented 3D boxes with their overlap measures, BEV grid binning, and the
//! plain-text calibration format shared by the dataset tools.

mod boxes;
mod calib;
mod camera;
mod grid;
mod transform;

pub use boxes::{center_distance_2d, iou_3d, rotated_iou_bev, wrap_angle, Box3D};
pub use calib::{read_calibration, write_calibration};
pub use camera::CameraModel;
pub use grid::BevGridSpec;
pub use transform::{rotation_from_rpy, rpy_from_rotation, RigidTransform};

use thiserror::Error;

/// Validation and IO failures raised by the geometry types.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("rotation matrix fails orthonormality check (max deviation {deviation:.3e})")]
    InvalidRotation { deviation: f64 },
    #[error("box size must be strictly positive and finite, got [{0}, {1}, {2}]")]
    InvalidBoxSize(f64, f64, f64),
    #[error("detection score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("camera model invalid: {0}")]
    InvalidCamera(String),
    #[error("BEV grid spec invalid: {0}")]
    InvalidGrid(String),
    #[error("calibration io: {0}")]
    Io(#[from] std::io::Error),
    #[error("calibration parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
