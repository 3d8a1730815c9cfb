use bevbench_geom::{center_distance_2d, rotated_iou_bev, Box3D};

use crate::MetricsError;

/// How a detection and a ground-truth box are deemed to describe the same
/// object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchFamily {
    /// Ground-plane center distance at or below the threshold; the nearest
    /// free ground truth wins.
    CenterDistance,
    /// Rotated BEV IoU at or above the threshold; the highest-overlap free
    /// ground truth wins.
    Iou,
}

/// Matching rules plus the threshold sweep evaluation averages over.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    pub family: MatchFamily,
    pub thresholds: Vec<f64>,
    pub per_class: bool,
}

impl MatchConfig {
    /// Center-distance matching averaged over the 0.5/1/2/4 m thresholds,
    /// evaluated per class.
    pub fn nuscenes_style() -> Self {
        MatchConfig {
            family: MatchFamily::CenterDistance,
            thresholds: vec![0.5, 1.0, 2.0, 4.0],
            per_class: true,
        }
    }

    /// Rotated-IoU matching at a single 0.7 minimum, evaluated per class.
    pub fn kitti_style() -> Self {
        MatchConfig {
            family: MatchFamily::Iou,
            thresholds: vec![0.7],
            per_class: true,
        }
    }

    /// The same rules with class labels ignored, for detectors that emit a
    /// single objectness class.
    pub fn class_agnostic(mut self) -> Self {
        self.per_class = false;
        self
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.thresholds.is_empty() {
            return Err(MetricsError::InvalidConfig("no thresholds given".into()));
        }
        for pair in self.thresholds.windows(2) {
            if pair[1] <= pair[0] {
                return Err(MetricsError::InvalidConfig(format!(
                    "thresholds must ascend strictly: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        for t in &self.thresholds {
            if !(t.is_finite() && *t > 0.0) {
                return Err(MetricsError::InvalidConfig(format!(
                    "threshold {t} must be positive and finite"
                )));
            }
            if self.family == MatchFamily::Iou && *t > 1.0 {
                return Err(MetricsError::InvalidConfig(format!(
                    "IoU threshold {t} exceeds 1"
                )));
            }
        }
        Ok(())
    }

    /// Threshold at which true-positive errors are gathered: the 2 m
    /// convention for distance matching, the single minimum for IoU.
    pub fn tp_error_threshold(&self) -> f64 {
        match self.family {
            MatchFamily::CenterDistance => 2.0,
            MatchFamily::Iou => self.thresholds[0],
        }
    }
}

/// Outcome of matching one frame at one threshold. Matches are listed in
/// the descending-score order they were made; unmatched indices ascend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSet {
    /// (detection index, ground-truth index) pairs.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_ground_truth: Vec<usize>,
}

/// Greedy matching: detections are visited in descending score order and
/// each claims its best free ground truth under the configured family, or
/// goes unmatched. Every ground truth is consumed at most once.
pub fn match_boxes(
    detections: &[Box3D],
    ground_truth: &[Box3D],
    cfg: &MatchConfig,
    threshold: f64,
) -> MatchSet {
    let score =
        |i: usize| detections[i].score.expect("detections carry confidence scores");
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        score(b)
            .partial_cmp(&score(a))
            .expect("scores are finite")
            .then(a.cmp(&b))
    });

    let mut taken = vec![false; ground_truth.len()];
    let mut matches = Vec::new();
    let mut unmatched_detections = Vec::new();
    for &d in &order {
        let det = &detections[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in ground_truth.iter().enumerate() {
            if taken[g] || (cfg.per_class && gt.class_id != det.class_id) {
                continue;
            }
            let candidate = match cfg.family {
                MatchFamily::CenterDistance => {
                    let dist = center_distance_2d(det, gt);
                    (dist <= threshold).then_some(dist)
                }
                MatchFamily::Iou => {
                    let iou = rotated_iou_bev(det, gt);
                    (iou >= threshold).then_some(-iou)
                }
            };
            if let Some(cost) = candidate {
                if best.map_or(true, |(_, c)| cost < c) {
                    best = Some((g, cost));
                }
            }
        }
        match best {
            Some((g, _)) => {
                taken[g] = true;
                matches.push((d, g));
            }
            None => unmatched_detections.push(d),
        }
    }
    unmatched_detections.sort_unstable();

    let unmatched_ground_truth = (0..ground_truth.len()).filter(|&g| !taken[g]).collect();
    MatchSet {
        matches,
        unmatched_detections,
        unmatched_ground_truth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn gt(x: f64, y: f64, class: u32) -> Box3D {
        Box3D::ground_truth(Vector3::new(x, y, 0.8), [4.0, 2.0, 1.5], 0.0, class).unwrap()
    }

    fn det(x: f64, y: f64, class: u32, s: f64) -> Box3D {
        Box3D::detection(Vector3::new(x, y, 0.8), [4.0, 2.0, 1.5], 0.0, class, s).unwrap()
    }

    #[test]
    fn a_detection_on_its_ground_truth_matches_at_every_threshold() {
        let cfg = MatchConfig::nuscenes_style();
        for &t in &cfg.thresholds {
            let m = match_boxes(&[det(3.0, 1.0, 1, 0.9)], &[gt(3.0, 1.0, 1)], &cfg, t);
            assert_eq!(m.matches, vec![(0, 0)], "threshold {t}");
            assert!(m.unmatched_detections.is_empty());
            assert!(m.unmatched_ground_truth.is_empty());
        }
    }

    #[test]
    fn distance_thresholds_gate_the_match() {
        let cfg = MatchConfig::nuscenes_style();
        let d = [det(1.5, 0.0, 1, 0.9)];
        let g = [gt(0.0, 0.0, 1)];
        for (t, expect_match) in [(0.5, false), (1.0, false), (2.0, true), (4.0, true)] {
            let m = match_boxes(&d, &g, &cfg, t);
            assert_eq!(!m.matches.is_empty(), expect_match, "threshold {t}");
        }
    }

    #[test]
    fn the_higher_scored_detection_wins_a_contested_ground_truth() {
        let cfg = MatchConfig::nuscenes_style();
        let d = [det(0.4, 0.0, 1, 0.3), det(0.5, 0.0, 1, 0.8)];
        let m = match_boxes(&d, &[gt(0.0, 0.0, 1)], &cfg, 2.0);
        assert_eq!(m.matches, vec![(1, 0)]);
        assert_eq!(m.unmatched_detections, vec![0]);
    }

    #[test]
    fn per_class_matching_respects_labels_and_agnostic_ignores_them() {
        let d = [det(0.1, 0.0, 2, 0.9)];
        let g = [gt(0.0, 0.0, 1)];
        let strict = MatchConfig::nuscenes_style();
        assert!(match_boxes(&d, &g, &strict, 2.0).matches.is_empty());
        let agnostic = MatchConfig::nuscenes_style().class_agnostic();
        assert_eq!(match_boxes(&d, &g, &agnostic, 2.0).matches, vec![(0, 0)]);
    }

    #[test]
    fn each_ground_truth_is_consumed_once() {
        let cfg = MatchConfig::nuscenes_style();
        let d = [det(0.2, 0.0, 1, 0.9), det(0.3, 0.0, 1, 0.8)];
        let m = match_boxes(&d, &[gt(0.0, 0.0, 1)], &cfg, 4.0);
        assert_eq!(m.matches.len(), 1);
        assert_eq!(m.unmatched_detections.len(), 1);
    }

    #[test]
    fn iou_matching_takes_the_highest_overlap() {
        let cfg = MatchConfig::kitti_style();
        let d = [det(0.2, 0.0, 1, 0.9)];
        let g = [gt(0.0, 0.0, 1), gt(0.5, 0.0, 1)];
        let m = match_boxes(&d, &g, &cfg, 0.7);
        assert_eq!(m.matches, vec![(0, 1)]);
    }

    #[test]
    fn bad_threshold_lists_are_rejected() {
        let mut cfg = MatchConfig::nuscenes_style();
        assert!(cfg.validate().is_ok());
        cfg.thresholds = vec![1.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg.thresholds = vec![-0.5];
        assert!(cfg.validate().is_err());
        cfg.thresholds = vec![];
        assert!(cfg.validate().is_err());
        let mut iou = MatchConfig::kitti_style();
        iou.thresholds = vec![1.5];
        assert!(iou.validate().is_err());
    }
}
