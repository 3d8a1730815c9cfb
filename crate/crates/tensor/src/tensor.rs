//! Dense rank-4 tensors in batch × channel × height × width layout.

use std::sync::Arc;

use crate::TensorError;

/// Dimensions as (batch, channels, height, width).
pub type Shape = [usize; 4];

/// A dense 64-bit float tensor with shape (B, C, H, W), row-major with W
/// fastest. Values are immutable once produced by an op; cloning shares the
/// underlying buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: Shape,
    data: Arc<Vec<f64>>,
}

impl Tensor4 {
    /// A tensor of zeros.
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    /// A tensor with every element set to `value`.
    pub fn filled(shape: Shape, value: f64) -> Self {
        assert_valid_shape(shape);
        Tensor4 {
            shape,
            data: Arc::new(vec![value; numel(shape)]),
        }
    }

    /// Wraps an existing buffer; its length must equal B·C·H·W.
    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self, TensorError> {
        assert_valid_shape(shape);
        if data.len() != numel(shape) {
            return Err(TensorError::DataLength {
                expected: numel(shape),
                got: data.len(),
            });
        }
        Ok(Tensor4 {
            shape,
            data: Arc::new(data),
        })
    }

    /// Reinterprets the same buffer under a new shape with equal element
    /// count. No data is copied.
    pub fn reshaped(&self, shape: Shape) -> Result<Self, TensorError> {
        assert_valid_shape(shape);
        if numel(shape) != self.len() {
            return Err(TensorError::DataLength {
                expected: self.len(),
                got: numel(shape),
            });
        }
        Ok(Tensor4 {
            shape,
            data: Arc::clone(&self.data),
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat index of (b, c, h, w).
    #[inline]
    pub fn index(&self, b: usize, c: usize, h: usize, w: usize) -> usize {
        debug_assert!(b < self.shape[0] && c < self.shape[1]);
        debug_assert!(h < self.shape[2] && w < self.shape[3]);
        ((b * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.index(b, c, h, w)]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the buffer, copying first if it is shared.
    pub fn data_mut(&mut self) -> &mut [f64] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    /// A new tensor with `f` applied elementwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor4 {
            shape: self.shape,
            data: Arc::new(self.data.iter().map(|&v| f(v)).collect()),
        }
    }

    /// True when the two tensors have the same shape and every pair of
    /// elements differs by at most `tol`.
    pub fn allclose(&self, other: &Tensor4, tol: f64) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// Element count for a shape.
pub fn numel(shape: Shape) -> usize {
    shape[0] * shape[1] * shape[2] * shape[3]
}

fn assert_valid_shape(shape: Shape) {
    assert!(
        shape.iter().all(|&d| d >= 1),
        "all tensor dimensions must be >= 1, got {shape:?}"
    );
}
