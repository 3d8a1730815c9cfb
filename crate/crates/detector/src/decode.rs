use bevbench_geom::{rotated_iou_bev, BevGridSpec, Box3D};
use bevbench_sim::FrameData;
use bevbench_tensor::{GradTape, ModelRun, ParamStore, RunMode, Tensor4};

use crate::config::DetectorConfig;
use crate::features::{lift_camera_to_bev, pillarize};
use crate::head::{DetectorModel, REG_CHANNELS};
use crate::targets::{decode_cell, AnchorSpec};
use crate::DetectorError;

/// Turns one frame's head output into detections: sigmoid scores, anchor
/// offsets inverted at every cell at or above `score_threshold`, then greedy
/// rotated NMS. Detections are class-agnostic (class id 0) and sorted by
/// descending score.
pub fn decode_detections(
    objectness: &Tensor4,
    regression: &Tensor4,
    grid: &BevGridSpec,
    anchor: &AnchorSpec,
    score_threshold: f64,
    nms_iou: f64,
) -> Result<Vec<Box3D>, DetectorError> {
    let (rows, cols) = (grid.rows, grid.cols);
    if objectness.shape() != [1, 1, rows, cols] {
        return Err(DetectorError::Input(format!(
            "objectness shape {:?} does not match a single {rows}x{cols} frame",
            objectness.shape()
        )));
    }
    if regression.shape() != [1, REG_CHANNELS, rows, cols] {
        return Err(DetectorError::Input(format!(
            "regression shape {:?} does not match a single {rows}x{cols} frame",
            regression.shape()
        )));
    }

    let mut detections = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let logit = objectness.at(0, 0, r, c);
            let score = 1.0 / (1.0 + (-logit).exp());
            if score < score_threshold {
                continue;
            }
            let mut reg = [0.0f64; REG_CHANNELS];
            for (ch, v) in reg.iter_mut().enumerate() {
                *v = regression.at(0, ch, r, c);
            }
            let (center, size, yaw) = decode_cell(&reg, (r, c), grid, anchor);
            detections.push(
                Box3D::detection(center, size, yaw, 0, score)
                    .map_err(|e| DetectorError::Input(format!("decoded an invalid box: {e}")))?,
            );
        }
    }
    Ok(rotated_nms(detections, nms_iou))
}

/// Greedy non-maximum suppression under rotated BEV IoU: boxes are visited
/// in descending score order (cell order breaking ties) and each survivor
/// suppresses every later box overlapping it above `iou_threshold`.
pub fn rotated_nms(mut detections: Vec<Box3D>, iou_threshold: f64) -> Vec<Box3D> {
    detections.sort_by(|a, b| {
        let (sa, sb) = (a.score.unwrap_or(0.0), b.score.unwrap_or(0.0));
        sb.partial_cmp(&sa).expect("scores are finite")
    });
    let mut kept: Vec<Box3D> = Vec::new();
    for candidate in detections {
        if kept
            .iter()
            .all(|k| rotated_iou_bev(k, &candidate) <= iou_threshold)
        {
            kept.push(candidate);
        }
    }
    kept
}

/// Runs the detector over one frame in evaluation mode (batch-norm layers
/// read their running statistics) and decodes the result with the
/// thresholds from `config`.
pub fn detect_frame(
    model: &DetectorModel,
    store: &ParamStore,
    config: &DetectorConfig,
    frame: &FrameData,
) -> Result<Vec<Box3D>, DetectorError> {
    let lidar = pillarize(&frame.cloud, &config.grid);
    let camera = lift_camera_to_bev(
        &frame.images,
        &frame.cameras,
        &config.grid,
        config.camera_channels(),
    )?;

    let mut tape = GradTape::new();
    let mut run = ModelRun::new(&mut tape, store, RunMode::Eval);
    let lv = run.tape.leaf(lidar);
    let cv = run.tape.leaf(camera);
    let (obj, reg) = model.forward(&mut run, lv, cv)?;
    run.finish();

    decode_detections(
        &tape.value(obj),
        &tape.value(reg),
        &config.grid,
        &config.anchor,
        config.score_threshold,
        config.nms_iou,
    )
}
