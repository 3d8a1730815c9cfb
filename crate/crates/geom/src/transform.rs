use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};

use crate::GeomError;

/// Rigid motion `p_out = rotation * p_in + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform after checking that `rotation` is a proper rotation
    /// (RᵀR = I and det R = +1, both within 1e-9).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        let gram = rotation.transpose() * rotation;
        let mut deviation = (rotation.determinant() - 1.0).abs();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((gram[(i, j)] - target).abs());
            }
        }
        if deviation > 1e-9 {
            return Err(GeomError::InvalidRotation { deviation });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_rpy_translation(roll: f64, pitch: f64, yaw: f64, translation: Vector3<f64>) -> Self {
        Self {
            rotation: rotation_from_rpy(roll, pitch, yaw),
            translation,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Rotation matrix composed as `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rotation_from_rpy(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

/// Recovers `(roll, pitch, yaw)` such that [`rotation_from_rpy`] rebuilds the
/// matrix; pitch is confined to [−π/2, π/2]. At the gimbal-lock poles
/// (|pitch| = π/2) roll is reported as zero and the free angle goes to yaw.
pub fn rpy_from_rotation(r: &Matrix3<f64>) -> (f64, f64, f64) {
    let sp = -r[(2, 0)];
    if sp.abs() > 1.0 - 1e-12 {
        let pitch = if sp > 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
        let yaw = (-r[(0, 1)]).atan2(r[(1, 1)]);
        return (0.0, pitch, yaw);
    }
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    let pitch = sp.clamp(-1.0, 1.0).asin();
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    (roll, pitch, yaw)
}
