use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::GeomError;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a % two_pi;
    if r <= -PI {
        r += two_pi;
    } else if r > PI {
        r -= two_pi;
    }
    r
}

/// Oriented 3D box on the ground plane: axis-aligned in z, yaw-rotated in the
/// BEV plane. `size` is (length, width, height); length runs along the box
/// x axis at zero yaw.
#[derive(Debug, Clone, PartialEq)]
pub struct Box3D {
    pub center: Vector3<f64>,
    pub size: [f64; 3],
    pub yaw: f64,
    pub class_id: u32,
    /// Confidence, present exactly when the box is a detection.
    pub score: Option<f64>,
    pub is_ground_truth: bool,
}

impl Box3D {
    pub fn ground_truth(
        center: Vector3<f64>,
        size: [f64; 3],
        yaw: f64,
        class_id: u32,
    ) -> Result<Self, GeomError> {
        validate_size(size)?;
        Ok(Self {
            center,
            size,
            yaw: wrap_angle(yaw),
            class_id,
            score: None,
            is_ground_truth: true,
        })
    }

    pub fn detection(
        center: Vector3<f64>,
        size: [f64; 3],
        yaw: f64,
        class_id: u32,
        score: f64,
    ) -> Result<Self, GeomError> {
        validate_size(size)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(GeomError::InvalidScore(score));
        }
        Ok(Self {
            center,
            size,
            yaw: wrap_angle(yaw),
            class_id,
            score: Some(score),
            is_ground_truth: false,
        })
    }

    /// Ground-plane corners in counterclockwise order.
    pub fn corners_bev(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (self.size[0] / 2.0, self.size[1] / 2.0);
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[x, y]| {
            [
                self.center.x + c * x - s * y,
                self.center.y + s * x + c * y,
            ]
        })
    }

    /// All eight corners, bottom face first.
    pub fn corners_3d(&self) -> [Vector3<f64>; 8] {
        let bev = self.corners_bev();
        let (z0, z1) = self.z_interval();
        let mut out = [Vector3::zeros(); 8];
        for (i, [x, y]) in bev.into_iter().enumerate() {
            out[i] = Vector3::new(x, y, z0);
            out[i + 4] = Vector3::new(x, y, z1);
        }
        out
    }

    pub fn z_interval(&self) -> (f64, f64) {
        let hh = self.size[2] / 2.0;
        (self.center.z - hh, self.center.z + hh)
    }

    pub fn bev_area(&self) -> f64 {
        self.size[0] * self.size[1]
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }
}

fn validate_size(size: [f64; 3]) -> Result<(), GeomError> {
    if size.iter().all(|s| s.is_finite() && *s > 0.0) {
        Ok(())
    } else {
        Err(GeomError::InvalidBoxSize(size[0], size[1], size[2]))
    }
}

/// Exact overlap of the two yaw-rotated ground-plane rectangles over their
/// union, via convex polygon clipping.
pub fn rotated_iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    let pa = a.corners_bev();
    let pb = b.corners_bev();
    let inter = convex_intersection_area(&pa, &pb);
    let union = shoelace_area(&pa) + shoelace_area(&pb) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// BEV intersection area times vertical overlap, over the volume union.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let pa = a.corners_bev();
    let pb = b.corners_bev();
    let (a0, a1) = a.z_interval();
    let (b0, b1) = b.z_interval();
    let overlap = (a1.min(b1) - a0.max(b0)).max(0.0);
    let inter = convex_intersection_area(&pa, &pb) * overlap;
    let union = shoelace_area(&pa) * (a1 - a0) + shoelace_area(&pb) * (b1 - b0) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between the (x, y) centers.
pub fn center_distance_2d(a: &Box3D, b: &Box3D) -> f64 {
    (a.center.x - b.center.x).hypot(a.center.y - b.center.y)
}

fn shoelace_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        twice += x0 * y1 - x1 * y0;
    }
    twice.abs() / 2.0
}

/// Clips `subject` against the counterclockwise convex polygon `clipper`
/// (Sutherland–Hodgman) and returns the shoelace area of the result.
fn convex_intersection_area(subject: &[[f64; 2]; 4], clipper: &[[f64; 2]; 4]) -> f64 {
    let mut poly: Vec<[f64; 2]> = subject.to_vec();
    for e in 0..4 {
        if poly.is_empty() {
            return 0.0;
        }
        let q1 = clipper[e];
        let q2 = clipper[(e + 1) % 4];
        poly = clip_against_edge(&poly, q1, q2);
    }
    shoelace_area(&poly)
}

fn clip_against_edge(poly: &[[f64; 2]], q1: [f64; 2], q2: [f64; 2]) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| (q2[0] - q1[0]) * (p[1] - q1[1]) - (q2[1] - q1[1]) * (p[0] - q1[0]);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let sc = side(cur);
        let sp = side(prev);
        if sc >= 0.0 {
            if sp < 0.0 {
                out.push(edge_intersection(prev, cur, sp, sc));
            }
            out.push(cur);
        } else if sp >= 0.0 {
            out.push(edge_intersection(prev, cur, sp, sc));
        }
    }
    out
}

fn edge_intersection(p0: [f64; 2], p1: [f64; 2], s0: f64, s1: f64) -> [f64; 2] {
    let t = s0 / (s0 - s1);
    [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])]
}
