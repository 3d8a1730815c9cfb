use bevbench_geom::Box3D;
use rayon::prelude::*;

use crate::matching::{match_boxes, MatchConfig};
use crate::MetricsError;

/// Precision-recall operating points swept over detection confidence, one
/// point per distinct score cut, in descending-confidence order. Recall is
/// non-decreasing along the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<(f64, f64)>,
}

impl PrCurve {
    /// Exact area under the step envelope: precision is made monotone
    /// non-increasing from the right, then integrated over recall. Equals
    /// brute-force enumeration of every score threshold.
    pub fn step_ap(&self) -> f64 {
        let mut envelope = self.points.clone();
        let mut best = 0.0;
        for point in envelope.iter_mut().rev() {
            best = best.max(point.1);
            point.1 = best;
        }
        let mut area = 0.0;
        let mut previous_recall = 0.0;
        for (recall, precision) in envelope {
            area += (recall - previous_recall) * precision;
            previous_recall = recall;
        }
        area
    }

    /// Fixed-grid alternative: the envelope sampled at `samples` evenly
    /// spaced recalls in [0, 1] and averaged (11 or 40 points in the usual
    /// conventions). The exact [`Self::step_ap`] is the default elsewhere.
    pub fn interpolated_ap(&self, samples: usize) -> f64 {
        assert!(samples >= 2, "need at least the recall endpoints");
        let envelope_at = |r: f64| {
            self.points
                .iter()
                .filter(|(recall, _)| *recall >= r)
                .map(|(_, precision)| *precision)
                .fold(0.0, f64::max)
        };
        let total: f64 = (0..samples)
            .map(|i| envelope_at(i as f64 / (samples - 1) as f64))
            .sum();
        total / samples as f64
    }
}

/// Labels every detection of every frame as true or false positive by
/// greedy per-frame matching, pooling (score, label) pairs in frame order.
fn labeled_scores(
    frames: &[(&[Box3D], &[Box3D])],
    cfg: &MatchConfig,
    threshold: f64,
) -> (Vec<(f64, bool)>, usize) {
    let per_frame: Vec<(Vec<(f64, bool)>, usize)> = frames
        .par_iter()
        .map(|(detections, ground_truth)| {
            let matched = match_boxes(detections, ground_truth, cfg, threshold);
            let mut hit = vec![false; detections.len()];
            for (d, _) in matched.matches {
                hit[d] = true;
            }
            let labels = detections
                .iter()
                .zip(&hit)
                .map(|(det, &tp)| (det.score.expect("detections carry scores"), tp))
                .collect();
            (labels, ground_truth.len())
        })
        .collect();

    let mut pooled = Vec::new();
    let mut total_ground_truth = 0;
    for (labels, n_gt) in per_frame {
        pooled.extend(labels);
        total_ground_truth += n_gt;
    }
    (pooled, total_ground_truth)
}

/// Precision-recall curve over a set of frames, `None` when the frames
/// contain no ground truth (precision-recall is undefined there).
pub fn dataset_pr_curve(
    frames: &[(&[Box3D], &[Box3D])],
    cfg: &MatchConfig,
    threshold: f64,
) -> Option<PrCurve> {
    let (mut labeled, total_gt) = labeled_scores(frames, cfg, threshold);
    if total_gt == 0 {
        return None;
    }
    labeled.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));

    let mut points = Vec::new();
    let mut true_positives = 0usize;
    let mut seen = 0usize;
    let mut i = 0;
    while i < labeled.len() {
        let cut_score = labeled[i].0;
        while i < labeled.len() && labeled[i].0 == cut_score {
            seen += 1;
            true_positives += labeled[i].1 as usize;
            i += 1;
        }
        points.push((
            true_positives as f64 / total_gt as f64,
            true_positives as f64 / seen as f64,
        ));
    }
    Some(PrCurve { points })
}

/// Average precision over a set of frames: the exact step-envelope area of
/// the confidence sweep. `None` when no ground truth exists.
pub fn dataset_average_precision(
    frames: &[(&[Box3D], &[Box3D])],
    cfg: &MatchConfig,
    threshold: f64,
) -> Option<f64> {
    dataset_pr_curve(frames, cfg, threshold).map(|curve| curve.step_ap())
}

/// Single-scene average precision. Inputs should already be restricted to
/// one class when per-class evaluation is intended.
pub fn average_precision(
    detections: &[Box3D],
    ground_truth: &[Box3D],
    cfg: &MatchConfig,
    threshold: f64,
) -> Option<f64> {
    dataset_average_precision(&[(detections, ground_truth)], cfg, threshold)
}

/// Mean AP: within each class the defined per-threshold APs are averaged,
/// then the class means are averaged. Classes with no defined AP (no
/// ground truth anywhere) are excluded; if none remain, that is an error.
pub fn mean_ap(per_class: &[Vec<Option<f64>>]) -> Result<f64, MetricsError> {
    let class_means: Vec<f64> = per_class
        .iter()
        .filter_map(|aps| {
            let defined: Vec<f64> = aps.iter().flatten().copied().collect();
            (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
        })
        .collect();
    if class_means.is_empty() {
        return Err(MetricsError::AllUndefined);
    }
    Ok(class_means.iter().sum::<f64>() / class_means.len() as f64)
}
