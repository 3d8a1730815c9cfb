use bevbench_geom::{BevGridSpec, Box3D};
use bevbench_tensor::Tensor4;
use nalgebra::Vector3;

use crate::head::REG_CHANNELS;
use crate::DetectorError;

/// The square prior box regressed against at every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSpec {
    /// (length, width, height) of the prior.
    pub size: [f64; 3],
    /// Height of the prior's center above the ground plane.
    pub center_z: f64,
}

impl Default for AnchorSpec {
    /// Sized to the median synthetic target box.
    fn default() -> Self {
        AnchorSpec {
            size: [3.6, 1.8, 1.6],
            center_z: 0.8,
        }
    }
}

impl AnchorSpec {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(DetectorError::InvalidConfig(format!(
                "anchor size {:?} must be positive and finite",
                self.size
            )));
        }
        if !self.center_z.is_finite() {
            return Err(DetectorError::InvalidConfig(
                "anchor center_z must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Dense per-cell training targets for one frame: objectness `(1, 1, H, W)`,
/// regression `(1, 8, H, W)`, and a mask that is 1 on every regression
/// channel of a positive cell.
#[derive(Debug, Clone)]
pub struct Targets {
    pub objectness: Tensor4,
    pub regression: Tensor4,
    pub mask: Tensor4,
    pub positive_count: usize,
}

/// Offsets of `b` from the anchor at `cell`: center offsets scaled by the
/// cell size (dz in meters), log size ratios, and the yaw as a sin/cos pair.
pub fn encode_box(b: &Box3D, cell: (usize, usize), grid: &BevGridSpec, anchor: &AnchorSpec) -> [f64; REG_CHANNELS] {
    let center = grid.cell_center(cell.0, cell.1);
    [
        (b.center.x - center.x) / grid.cell_size_x(),
        (b.center.y - center.y) / grid.cell_size_y(),
        b.center.z - anchor.center_z,
        (b.size[0] / anchor.size[0]).ln(),
        (b.size[1] / anchor.size[1]).ln(),
        (b.size[2] / anchor.size[2]).ln(),
        b.yaw.sin(),
        b.yaw.cos(),
    ]
}

/// Inverse of [`encode_box`]: reconstructs center, size, and yaw from the
/// regression vector at `cell`.
pub fn decode_cell(
    reg: &[f64; REG_CHANNELS],
    cell: (usize, usize),
    grid: &BevGridSpec,
    anchor: &AnchorSpec,
) -> (Vector3<f64>, [f64; 3], f64) {
    let center = grid.cell_center(cell.0, cell.1);
    let position = Vector3::new(
        center.x + reg[0] * grid.cell_size_x(),
        center.y + reg[1] * grid.cell_size_y(),
        anchor.center_z + reg[2],
    );
    let size = [
        anchor.size[0] * reg[3].exp(),
        anchor.size[1] * reg[4].exp(),
        anchor.size[2] * reg[5].exp(),
    ];
    let yaw = reg[6].atan2(reg[7]);
    (position, size, yaw)
}

/// Assigns each ground-truth box to the cell containing its center. Boxes
/// centered outside the grid are dropped; if two boxes land in one cell the
/// first in the list keeps it.
pub fn encode_targets(boxes: &[Box3D], grid: &BevGridSpec, anchor: &AnchorSpec) -> Targets {
    let (rows, cols) = (grid.rows, grid.cols);
    let cells = rows * cols;
    let mut objectness = vec![0.0f64; cells];
    let mut regression = vec![0.0f64; REG_CHANNELS * cells];
    let mut mask = vec![0.0f64; REG_CHANNELS * cells];
    let mut positive_count = 0usize;

    for b in boxes {
        let Some((r, c)) = grid.bev_cell_of(&b.center) else {
            continue;
        };
        let idx = r * cols + c;
        if objectness[idx] == 1.0 {
            continue;
        }
        objectness[idx] = 1.0;
        positive_count += 1;
        let reg = encode_box(b, (r, c), grid, anchor);
        for (ch, value) in reg.iter().enumerate() {
            regression[ch * cells + idx] = *value;
            mask[ch * cells + idx] = 1.0;
        }
    }

    Targets {
        objectness: Tensor4::from_vec([1, 1, rows, cols], objectness)
            .expect("objectness buffer matches its shape"),
        regression: Tensor4::from_vec([1, REG_CHANNELS, rows, cols], regression)
            .expect("regression buffer matches its shape"),
        mask: Tensor4::from_vec([1, REG_CHANNELS, rows, cols], mask)
            .expect("mask buffer matches its shape"),
        positive_count,
    }
}
