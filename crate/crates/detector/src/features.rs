use bevbench_geom::{BevGridSpec, CameraModel};
use bevbench_sim::{PointCloud, SemanticImage};
use bevbench_tensor::Tensor4;
use nalgebra::Vector3;

use crate::DetectorError;

/// Hand-crafted pillar channels: log-scaled point count, mean z, max z,
/// mean intensity, mean in-cell x offset, mean in-cell y offset.
pub const PILLAR_CHANNELS: usize = 6;

/// Rasterizes a point cloud into per-cell pillar features of shape
/// `(1, 6, rows, cols)`. Points outside the grid are ignored and cells
/// without points are exactly zero across all channels.
pub fn pillarize(cloud: &PointCloud, grid: &BevGridSpec) -> Tensor4 {
    let (rows, cols) = (grid.rows, grid.cols);
    let cells = rows * cols;
    let mut count = vec![0.0f64; cells];
    let mut sum_z = vec![0.0f64; cells];
    let mut max_z = vec![f64::NEG_INFINITY; cells];
    let mut sum_intensity = vec![0.0f64; cells];
    let mut sum_dx = vec![0.0f64; cells];
    let mut sum_dy = vec![0.0f64; cells];

    for p in &cloud.points {
        let Some((r, c)) = grid.bev_cell_of(&Vector3::new(p.x, p.y, p.z)) else {
            continue;
        };
        let idx = r * cols + c;
        let center = grid.cell_center(r, c);
        count[idx] += 1.0;
        sum_z[idx] += p.z;
        max_z[idx] = max_z[idx].max(p.z);
        sum_intensity[idx] += p.intensity;
        sum_dx[idx] += p.x - center.x;
        sum_dy[idx] += p.y - center.y;
    }

    let mut data = vec![0.0f64; PILLAR_CHANNELS * cells];
    for idx in 0..cells {
        if count[idx] == 0.0 {
            continue;
        }
        let n = count[idx];
        data[idx] = n.ln_1p();
        data[cells + idx] = sum_z[idx] / n;
        data[2 * cells + idx] = max_z[idx];
        data[3 * cells + idx] = sum_intensity[idx] / n;
        data[4 * cells + idx] = sum_dx[idx] / n;
        data[5 * cells + idx] = sum_dy[idx] / n;
    }
    Tensor4::from_vec([1, PILLAR_CHANNELS, rows, cols], data)
        .expect("pillar buffer matches its shape by construction")
}

/// Projects every BEV cell's ground-plane center through each camera and
/// samples the nearest pixel of its semantic image; cells seen by several
/// cameras average their samples and unseen cells stay zero. The provided
/// calibrations are used as-is, so a perturbed extrinsic shifts the lifted
/// features exactly as the perturbation dictates.
pub fn lift_camera_to_bev(
    images: &[SemanticImage],
    cameras: &[CameraModel],
    grid: &BevGridSpec,
    channels: usize,
) -> Result<Tensor4, DetectorError> {
    if images.len() != cameras.len() {
        return Err(DetectorError::Input(format!(
            "{} images for {} cameras",
            images.len(),
            cameras.len()
        )));
    }
    if let Some(odd) = images.iter().find(|i| i.channels != channels) {
        return Err(DetectorError::Input(format!(
            "expected {} semantic channels, an image has {}",
            channels, odd.channels
        )));
    }

    let (rows, cols) = (grid.rows, grid.cols);
    let cells = rows * cols;
    let mut data = vec![0.0f64; channels * cells];
    for r in 0..rows {
        for c in 0..cols {
            let center = grid.cell_center(r, c);
            let idx = r * cols + c;
            let mut seen = 0.0f64;
            for (image, camera) in images.iter().zip(cameras) {
                let Some((u, v)) = camera.project_point(&center) else {
                    continue;
                };
                let (x, y) = (u.floor() as usize, v.floor() as usize);
                seen += 1.0;
                for ch in 0..channels {
                    data[ch * cells + idx] += image.at(ch, y, x);
                }
            }
            if seen > 0.0 {
                for ch in 0..channels {
                    data[ch * cells + idx] /= seen;
                }
            }
        }
    }
    Ok(Tensor4::from_vec([1, channels, rows, cols], data)
        .expect("lift buffer matches its shape by construction"))
}

/// Stacks single-frame `(1, C, H, W)` tensors into one `(B, C, H, W)` batch.
pub fn stack_batch(frames: &[Tensor4]) -> Result<Tensor4, DetectorError> {
    let first = frames
        .first()
        .ok_or_else(|| DetectorError::Input("cannot stack an empty batch".into()))?;
    let [b, c, h, w] = first.shape();
    if b != 1 {
        return Err(DetectorError::Input(format!(
            "stack_batch expects single-frame tensors, got batch {b}"
        )));
    }
    let mut data = Vec::with_capacity(frames.len() * first.len());
    for frame in frames {
        if frame.shape() != first.shape() {
            return Err(DetectorError::Input(format!(
                "mixed shapes in batch: {:?} vs {:?}",
                frame.shape(),
                first.shape()
            )));
        }
        data.extend_from_slice(frame.data());
    }
    Ok(Tensor4::from_vec([frames.len(), c, h, w], data)?)
}
