use std::collections::BTreeSet;

use bevbench_geom::Box3D;

use crate::ap::{dataset_average_precision, mean_ap};
use crate::matching::{match_boxes, MatchConfig};
use crate::score::nds3;
use crate::tp::{tp_errors, TpErrors};
use crate::MetricsError;

/// One frame's evaluation inputs.
#[derive(Debug, Clone, Default)]
pub struct EvalFrame {
    pub detections: Vec<Box3D>,
    pub ground_truth: Vec<Box3D>,
}

/// Per-threshold APs for one class (`class_id` is `None` for
/// class-agnostic evaluation); `None` entries are undefined for lack of
/// ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAp {
    pub class_id: Option<u32>,
    pub aps: Vec<Option<f64>>,
}

/// The full evaluation outcome over a frame set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub map: f64,
    pub nds: f64,
    pub tp_errors: TpErrors,
    pub per_class: Vec<ClassAp>,
}

fn class_view(frames: &[EvalFrame], class_id: Option<u32>) -> Vec<(Vec<Box3D>, Vec<Box3D>)> {
    frames
        .iter()
        .map(|f| {
            let keep = |b: &&Box3D| class_id.map_or(true, |c| b.class_id == c);
            (
                f.detections.iter().filter(keep).cloned().collect(),
                f.ground_truth.iter().filter(keep).cloned().collect(),
            )
        })
        .collect()
}

/// Evaluates detections against ground truth over a set of frames: AP per
/// class and threshold, their mean, true-positive errors at the
/// convention threshold, and the composite NDS-3 score.
pub fn evaluate(frames: &[EvalFrame], cfg: &MatchConfig) -> Result<EvalSummary, MetricsError> {
    cfg.validate()?;

    let classes: Vec<Option<u32>> = if cfg.per_class {
        let ids: BTreeSet<u32> = frames
            .iter()
            .flat_map(|f| f.ground_truth.iter().map(|b| b.class_id))
            .collect();
        if ids.is_empty() {
            vec![None]
        } else {
            ids.into_iter().map(Some).collect()
        }
    } else {
        vec![None]
    };

    let mut per_class = Vec::new();
    for &class_id in &classes {
        let view = class_view(frames, class_id);
        let borrowed: Vec<(&[Box3D], &[Box3D])> =
            view.iter().map(|(d, g)| (d.as_slice(), g.as_slice())).collect();
        let aps = cfg
            .thresholds
            .iter()
            .map(|&t| dataset_average_precision(&borrowed, cfg, t))
            .collect();
        per_class.push(ClassAp { class_id, aps });
    }

    let map = mean_ap(&per_class.iter().map(|c| c.aps.clone()).collect::<Vec<_>>())?;

    let tp_threshold = cfg.tp_error_threshold();
    let mut pairs = Vec::new();
    for frame in frames {
        let matched = match_boxes(&frame.detections, &frame.ground_truth, cfg, tp_threshold);
        for (d, g) in matched.matches {
            pairs.push((&frame.detections[d], &frame.ground_truth[g]));
        }
    }
    let errors = tp_errors(&pairs);

    Ok(EvalSummary {
        map,
        nds: nds3(map, &errors),
        tp_errors: errors,
        per_class,
    })
}
