use nalgebra::Vector3;

use crate::GeomError;

/// BEV rasterization grid, symmetric about the origin. Rows bin the x axis,
/// columns the y axis; each bin is half-open (lower edge in, upper edge out).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BevGridSpec {
    pub x_half_range: f64,
    pub y_half_range: f64,
    pub rows: usize,
    pub cols: usize,
}

impl BevGridSpec {
    pub fn new(
        x_half_range: f64,
        y_half_range: f64,
        rows: usize,
        cols: usize,
    ) -> Result<Self, GeomError> {
        if !(x_half_range > 0.0 && y_half_range > 0.0)
            || !x_half_range.is_finite()
            || !y_half_range.is_finite()
        {
            return Err(GeomError::InvalidGrid(format!(
                "half ranges must be positive and finite, got ({x_half_range}, {y_half_range})"
            )));
        }
        if rows == 0 || cols == 0 || rows % 2 != 0 || cols % 2 != 0 {
            return Err(GeomError::InvalidGrid(format!(
                "resolution must be even and nonzero, got {rows}x{cols}"
            )));
        }
        Ok(Self {
            x_half_range,
            y_half_range,
            rows,
            cols,
        })
    }

    pub fn cell_size_x(&self) -> f64 {
        2.0 * self.x_half_range / self.rows as f64
    }

    pub fn cell_size_y(&self) -> f64 {
        2.0 * self.y_half_range / self.cols as f64
    }

    /// Bins the (x, y) of a point; `None` outside the covered range.
    pub fn bev_cell_of(&self, p: &Vector3<f64>) -> Option<(usize, usize)> {
        let rx = (p.x + self.x_half_range) / self.cell_size_x();
        let cy = (p.y + self.y_half_range) / self.cell_size_y();
        if !(0.0..self.rows as f64).contains(&rx) || !(0.0..self.cols as f64).contains(&cy) {
            return None;
        }
        Some((rx.floor() as usize, cy.floor() as usize))
    }

    /// Ground-plane center of a cell (z = 0).
    pub fn cell_center(&self, row: usize, col: usize) -> Vector3<f64> {
        Vector3::new(
            -self.x_half_range + (row as f64 + 0.5) * self.cell_size_x(),
            -self.y_half_range + (col as f64 + 0.5) * self.cell_size_y(),
            0.0,
        )
    }
}
