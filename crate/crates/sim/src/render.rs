use bevbench_geom::{CameraModel, RigidTransform};
use nalgebra::Vector3;

use crate::{Scene, SimError};

/// Channel-major semantic image: channel 0 is background, channels 1.. are
/// one-hot foreground classes. Exactly one channel is 1.0 at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticImage {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl SemanticImage {
    pub fn background(channels: usize, height: usize, width: usize) -> Self {
        let mut data = vec![0.0; channels * height * width];
        data[..height * width].fill(1.0);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn at(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    fn set_class(&mut self, class: usize, y: usize, x: usize) {
        for c in 0..self.channels {
            let value = if c == class { 1.0 } else { 0.0 };
            self.data[(c * self.height + y) * self.width + x] = value;
        }
    }
}

/// Two forward-facing pinhole cameras (front-left, front-right) mounted
/// 1.6 m up, 0.5 m off-center, yawed ±25° outward, with a 90° horizontal
/// field of view.
pub fn default_rig(width: usize, height: usize) -> Vec<CameraModel> {
    let focal = width as f64 / 2.0;
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let base_yaw = -std::f64::consts::FRAC_PI_2;
    let tilt = 25.0_f64.to_radians();
    let left = RigidTransform::from_rpy_translation(
        -std::f64::consts::FRAC_PI_2,
        0.0,
        base_yaw + tilt,
        Vector3::new(0.2, 0.5, 1.6),
    );
    let right = RigidTransform::from_rpy_translation(
        -std::f64::consts::FRAC_PI_2,
        0.0,
        base_yaw - tilt,
        Vector3::new(0.2, -0.5, 1.6),
    );
    vec![
        CameraModel::new(focal, focal, cx, cy, width, height, left)
            .expect("rig intrinsics are valid"),
        CameraModel::new(focal, focal, cx, cy, width, height, right)
            .expect("rig intrinsics are valid"),
    ]
}

/// Rasterizes the labeled boxes into a one-hot class mask: each box's eight
/// corners are projected, their convex hull is filled, and on overlap the box
/// with the smallest camera-frame center depth wins. Clutter boxes are not
/// drawn. Boxes with any corner closer than 0.05 m to the image plane
/// (including everything behind the camera) are skipped whole.
pub fn render_semantic_image(
    scene: &Scene,
    cam: &CameraModel,
    channels: usize,
) -> Result<SemanticImage, SimError> {
    if let Some(bad) = scene.boxes.iter().find(|b| b.class_id as usize >= channels) {
        return Err(SimError::InvalidConfig(format!(
            "box class {} does not fit in {} semantic channels",
            bad.class_id, channels
        )));
    }
    let (w, h) = (cam.width, cam.height);
    let mut image = SemanticImage::background(channels, h, w);
    let mut depth = vec![f64::INFINITY; h * w];
    let to_cam = cam.extrinsic.inverse();

    for b in &scene.boxes {
        let corners = b.corners_3d();
        let mut projected = Vec::with_capacity(8);
        let mut behind = false;
        for corner in &corners {
            let p = to_cam.apply_point(corner);
            if p.z < 0.05 {
                behind = true;
                break;
            }
            projected.push([
                cam.fx * p.x / p.z + cam.cx,
                cam.fy * p.y / p.z + cam.cy,
            ]);
        }
        if behind {
            continue;
        }
        let hull = convex_hull(&mut projected);
        if hull.len() < 3 {
            continue;
        }
        let center_depth = to_cam.apply_point(&b.center).z;

        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for [x, y] in &hull {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        let px0 = x0.floor().max(0.0) as usize;
        let px1 = (x1.ceil() as isize).clamp(0, w as isize) as usize;
        let py0 = y0.floor().max(0.0) as usize;
        let py1 = (y1.ceil() as isize).clamp(0, h as isize) as usize;

        for y in py0..py1 {
            for x in px0..px1 {
                let point = [x as f64 + 0.5, y as f64 + 0.5];
                if !inside_convex(&hull, point) {
                    continue;
                }
                let idx = y * w + x;
                if center_depth < depth[idx] {
                    depth[idx] = center_depth;
                    image.set_class(b.class_id as usize, y, x);
                }
            }
        }
    }
    Ok(image)
}

/// Andrew's monotone chain; returns the hull counterclockwise in image
/// coordinates (y down), duplicate points removed.
fn convex_hull(points: &mut Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    points.sort_by(|a, b| a.partial_cmp(b).expect("projected corners are finite"));
    points.dedup();
    let n = points.len();
    if n < 3 {
        return points.clone();
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for &p in points.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn inside_convex(hull: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = hull.len();
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross < 0.0 {
            return false;
        }
    }
    true
}
