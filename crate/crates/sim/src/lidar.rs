use std::f64::consts::PI;

use bevbench_geom::{Box3D, RigidTransform};
use nalgebra::Vector3;

use crate::{Scene, SimError};

/// Spinning multi-layer LiDAR: one ray per (elevation layer, azimuth step)
/// from the mount pose. `mount` maps sensor-frame directions into the
/// reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarModel {
    pub layer_count: usize,
    /// Strictly increasing elevation angles, radians; index = ring id.
    pub elevations: Vec<f64>,
    pub azimuth_step: f64,
    pub max_range: f64,
    pub mount: RigidTransform,
}

impl LidarModel {
    pub fn new(
        elevations: Vec<f64>,
        azimuth_step: f64,
        max_range: f64,
        mount: RigidTransform,
    ) -> Result<Self, SimError> {
        if elevations.is_empty() || elevations.len() > u16::MAX as usize {
            return Err(SimError::InvalidConfig(format!(
                "layer count {} outside 1..=65535",
                elevations.len()
            )));
        }
        if elevations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidConfig(
                "elevation angles must be strictly increasing".into(),
            ));
        }
        if !(azimuth_step > 0.0 && azimuth_step <= 2.0 * PI) {
            return Err(SimError::InvalidConfig(format!(
                "azimuth step {azimuth_step} outside (0, 2π]"
            )));
        }
        if !(max_range > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "max range {max_range} must be positive"
            )));
        }
        Ok(Self {
            layer_count: elevations.len(),
            elevations,
            azimuth_step,
            max_range,
            mount,
        })
    }

    /// 32 layers uniform over [−25°, +5°], 0.6° azimuth step, 60 m range,
    /// mounted 1.8 m above the origin.
    pub fn default_spinning() -> Self {
        let mount = RigidTransform::from_rpy_translation(0.0, 0.0, 0.0, Vector3::new(0.0, 0.0, 1.8));
        Self::new(uniform_elevations(32), 0.6_f64.to_radians(), 60.0, mount)
            .expect("default sensor parameters are valid")
    }

    /// A copy of this sensor with `n` layers spread uniformly over the same
    /// elevation span.
    pub fn with_layer_count(&self, n: usize) -> Result<Self, SimError> {
        let lo = *self.elevations.first().expect("validated non-empty");
        let hi = *self.elevations.last().expect("validated non-empty");
        let elevations = if n == 1 {
            vec![(lo + hi) / 2.0]
        } else {
            (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect()
        };
        Self::new(elevations, self.azimuth_step, self.max_range, self.mount.clone())
    }
}

fn uniform_elevations(n: usize) -> Vec<f64> {
    let lo = (-25.0_f64).to_radians();
    let hi = 5.0_f64.to_radians();
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// 1.0 for box hits, 0.3 for ground hits.
    pub intensity: f64,
    /// Index of the elevation layer that produced the point.
    pub ring: u16,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<LidarPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

struct ObbTest {
    cx: f64,
    cy: f64,
    cz: f64,
    cos: f64,
    sin: f64,
    half: [f64; 3],
}

impl ObbTest {
    fn new(b: &Box3D) -> Self {
        let (sin, cos) = b.yaw.sin_cos();
        Self {
            cx: b.center.x,
            cy: b.center.y,
            cz: b.center.z,
            cos,
            sin,
            half: [b.size[0] / 2.0, b.size[1] / 2.0, b.size[2] / 2.0],
        }
    }

    /// Entry distance of the ray into the box, if it hits in front of the
    /// origin (slab method in the box's yaw-aligned frame).
    fn entry(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let ox = o.x - self.cx;
        let oy = o.y - self.cy;
        let oz = o.z - self.cz;
        let axes = [
            (self.cos * ox + self.sin * oy, self.cos * d.x + self.sin * d.y, self.half[0]),
            (-self.sin * ox + self.cos * oy, -self.sin * d.x + self.cos * d.y, self.half[1]),
            (oz, d.z, self.half[2]),
        ];
        let mut t0 = 1e-9f64;
        let mut t1 = f64::INFINITY;
        for (p, v, h) in axes {
            if v.abs() < 1e-15 {
                if p.abs() > h {
                    return None;
                }
            } else {
                let (a, b) = ((-h - p) / v, (h - p) / v);
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                t0 = t0.max(a);
                t1 = t1.min(b);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some(t0)
    }
}

/// Casts every (layer, azimuth) ray against all boxes (targets and clutter)
/// and the ground plane z = 0; the nearest hit within range becomes a point.
pub fn raycast_lidar(scene: &Scene, lidar: &LidarModel) -> PointCloud {
    let origin = lidar.mount.translation;
    let n_az = (2.0 * PI / lidar.azimuth_step).round() as usize;
    let obbs: Vec<ObbTest> = scene
        .boxes
        .iter()
        .chain(&scene.clutter)
        .map(ObbTest::new)
        .collect();

    let mut points = Vec::new();
    for (ring, &elevation) in lidar.elevations.iter().enumerate() {
        let (se, ce) = elevation.sin_cos();
        for j in 0..n_az {
            let azimuth = j as f64 * lidar.azimuth_step;
            let (sa, ca) = azimuth.sin_cos();
            let d = lidar.mount.rotation * Vector3::new(ce * ca, ce * sa, se);

            let mut best_t = f64::INFINITY;
            let mut intensity = 0.0;
            if d.z < -1e-12 {
                let t = -origin.z / d.z;
                if t > 1e-9 && t <= lidar.max_range {
                    best_t = t;
                    intensity = 0.3;
                }
            }
            for obb in &obbs {
                if let Some(t) = obb.entry(&origin, &d) {
                    if t <= lidar.max_range && t < best_t {
                        best_t = t;
                        intensity = 1.0;
                    }
                }
            }
            if best_t.is_finite() {
                let p = origin + best_t * d;
                points.push(LidarPoint {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                    intensity,
                    ring: ring as u16,
                });
            }
        }
    }
    PointCloud { points }
}
