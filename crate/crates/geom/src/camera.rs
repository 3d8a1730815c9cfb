use nalgebra::Vector3;

use crate::{GeomError, RigidTransform};

/// Pinhole camera. The camera frame looks along +z with x right and y down;
/// `extrinsic` maps camera-frame points into the shared reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub extrinsic: RigidTransform,
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        extrinsic: RigidTransform,
    ) -> Result<Self, GeomError> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(GeomError::InvalidCamera(format!(
                "focal lengths must be positive, got ({fx}, {fy})"
            )));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(GeomError::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            extrinsic,
        })
    }

    /// Projects a reference-frame point to continuous pixel coordinates;
    /// `None` when the point is behind the camera or outside the image.
    pub fn project_point(&self, p_ref: &Vector3<f64>) -> Option<(f64, f64)> {
        let p_cam = self.extrinsic.inverse().apply_point(p_ref);
        if p_cam.z <= 0.0 {
            return None;
        }
        let u = self.fx * p_cam.x / p_cam.z + self.cx;
        let v = self.fy * p_cam.y / p_cam.z + self.cy;
        if !u.is_finite() || !v.is_finite() {
            return None;
        }
        if u < 0.0 || u >= self.width as f64 || v < 0.0 || v >= self.height as f64 {
            return None;
        }
        Some((u, v))
    }

    /// Reference-frame point seen at pixel `(u, v)` with camera-frame depth
    /// `depth`; inverse of [`Self::project_point`] for in-view points.
    pub fn unproject_pixel(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let p_cam = Vector3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        );
        self.extrinsic.apply_point(&p_cam)
    }
}
