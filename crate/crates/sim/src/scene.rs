use std::f64::consts::PI;

use bevbench_geom::{rotated_iou_bev, Box3D};
use bevbench_rng::SampleRng;
use nalgebra::Vector3;

use crate::SimError;

/// Sampling ranges for scene content. Centers are confined to the forward
/// sector covered by the default camera rig so that every object is visible
/// to at least one camera; all boxes rest on the ground plane z = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// Half extent of the scene in meters; box centers must stay inside.
    pub extent: f64,
    /// Inclusive range for the number of labeled target boxes.
    pub box_count: (usize, usize),
    /// Inclusive range for the number of unlabeled clutter boxes.
    pub clutter_count: (usize, usize),
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub length_range: (f64, f64),
    pub width_range: (f64, f64),
    pub height_range: (f64, f64),
    /// Foreground classes; labeled boxes draw class ids from 1..=class_count.
    pub class_count: u32,
    /// Total placement retries before giving up on a scene.
    pub max_rejections: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            extent: 16.0,
            box_count: (2, 5),
            clutter_count: (1, 3),
            x_range: (3.0, 13.0),
            y_range: (-8.0, 8.0),
            length_range: (2.6, 4.6),
            width_range: (1.4, 2.2),
            height_range: (1.3, 1.9),
            class_count: 3,
            max_rejections: 2000,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let ranges = [
            ("x_range", self.x_range),
            ("y_range", self.y_range),
            ("length_range", self.length_range),
            ("width_range", self.width_range),
            ("height_range", self.height_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} ({lo}, {hi}) is not an ordered finite range"
                )));
            }
        }
        if !(self.extent > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "extent must be positive, got {}",
                self.extent
            )));
        }
        let inside = |(lo, hi): (f64, f64)| lo >= -self.extent && hi <= self.extent;
        if !inside(self.x_range) || !inside(self.y_range) {
            return Err(SimError::InvalidConfig(
                "center ranges must lie within the scene extent".into(),
            ));
        }
        if self.box_count.0 > self.box_count.1 || self.clutter_count.0 > self.clutter_count.1 {
            return Err(SimError::InvalidConfig("count ranges must be ordered".into()));
        }
        if self.length_range.0 <= 0.0 || self.width_range.0 <= 0.0 || self.height_range.0 <= 0.0 {
            return Err(SimError::InvalidConfig("sizes must be positive".into()));
        }
        if self.class_count == 0 {
            return Err(SimError::InvalidConfig("need at least one class".into()));
        }
        Ok(())
    }
}

/// One synthetic frame: labeled targets, unlabeled clutter, ground plane at
/// z = 0. All boxes (targets and clutter together) are pairwise
/// non-overlapping with BEV IoU below 0.05.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub frame_key: String,
    pub boxes: Vec<Box3D>,
    pub clutter: Vec<Box3D>,
    pub extent: f64,
}

/// Samples a scene by rejection: each box is redrawn until it clears every
/// previously placed one. Deterministic in (global_seed, frame_key).
pub fn generate_scene(
    global_seed: u64,
    frame_key: &str,
    cfg: &SceneConfig,
) -> Result<Scene, SimError> {
    cfg.validate()?;
    let mut rng = SampleRng::new(global_seed, frame_key, "scene-gen");
    let n_boxes = sample_count(&mut rng, cfg.box_count);
    let n_clutter = sample_count(&mut rng, cfg.clutter_count);

    let mut placed: Vec<Box3D> = Vec::new();
    let mut rejections = 0usize;
    for i in 0..n_boxes + n_clutter {
        let class_id = if i < n_boxes {
            1 + rng.below(cfg.class_count as u64) as u32
        } else {
            0
        };
        loop {
            let cand = sample_box(&mut rng, cfg, class_id);
            if placed.iter().all(|b| rotated_iou_bev(b, &cand) < 0.05) {
                placed.push(cand);
                break;
            }
            rejections += 1;
            if rejections > cfg.max_rejections {
                return Err(SimError::RejectionBudget {
                    attempts: rejections,
                });
            }
        }
    }
    let clutter = placed.split_off(n_boxes);
    Ok(Scene {
        frame_key: frame_key.to_owned(),
        boxes: placed,
        clutter,
        extent: cfg.extent,
    })
}

fn sample_count(rng: &mut SampleRng, (lo, hi): (usize, usize)) -> usize {
    lo + rng.below((hi - lo + 1) as u64) as usize
}

fn sample_box(rng: &mut SampleRng, cfg: &SceneConfig, class_id: u32) -> Box3D {
    let cx = rng.uniform(cfg.x_range.0, cfg.x_range.1);
    let cy = rng.uniform(cfg.y_range.0, cfg.y_range.1);
    let l = rng.uniform(cfg.length_range.0, cfg.length_range.1);
    let w = rng.uniform(cfg.width_range.0, cfg.width_range.1);
    let h = rng.uniform(cfg.height_range.0, cfg.height_range.1);
    let yaw = rng.uniform(-PI, PI);
    Box3D::ground_truth(Vector3::new(cx, cy, h / 2.0), [l, w, h], yaw, class_id)
        .expect("sampled sizes are positive by config validation")
}
