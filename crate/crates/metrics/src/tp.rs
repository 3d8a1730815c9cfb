use bevbench_geom::{center_distance_2d, wrap_angle, Box3D};

/// Mean errors over the true positives of an evaluation: ground-plane
/// translation (m), scale (1 minus aligned IoU, in [0, 1]), and absolute
/// wrapped orientation difference (rad, in [0, pi]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpErrors {
    pub ate: f64,
    pub ase: f64,
    pub aoe: f64,
}

impl TpErrors {
    /// The no-information default used when nothing matched: every error
    /// saturates at its full penalty.
    pub fn fully_penalized() -> Self {
        TpErrors { ate: 1.0, ase: 1.0, aoe: 1.0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.ate, self.ase, self.aoe]
    }
}

/// 3D IoU of two boxes after aligning their centers and yaw, which leaves
/// only the size mismatch: the intersection is the per-axis minimum
/// product and the union follows from the two volumes.
pub fn aligned_size_iou(a: [f64; 3], b: [f64; 3]) -> f64 {
    let intersection: f64 = (0..3).map(|i| a[i].min(b[i])).product();
    let volume_a: f64 = a.iter().product();
    let volume_b: f64 = b.iter().product();
    intersection / (volume_a + volume_b - intersection)
}

/// Mean translation, scale, and orientation errors over matched
/// (detection, ground truth) pairs; fully penalized when no pairs exist.
pub fn tp_errors(pairs: &[(&Box3D, &Box3D)]) -> TpErrors {
    if pairs.is_empty() {
        return TpErrors::fully_penalized();
    }
    let n = pairs.len() as f64;
    let mut ate = 0.0;
    let mut ase = 0.0;
    let mut aoe = 0.0;
    for (det, gt) in pairs {
        ate += center_distance_2d(det, gt);
        ase += 1.0 - aligned_size_iou(det.size, gt.size);
        aoe += wrap_angle(det.yaw - gt.yaw).abs();
    }
    TpErrors { ate: ate / n, ase: ase / n, aoe: aoe / n }
}
