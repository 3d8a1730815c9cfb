//! Dense tensor math with reverse-mode differentiation, parameter storage
//! with Adam updates, binary checkpoints, and a finite-difference gradient
//! checker.
//!
//! The operation set is exactly what the fusion steps and the detection head
//! need; everything is 64-bit floats with fixed reduction orders, so results
//! are bitwise reproducible across runs and worker counts.

mod checkpoint;
mod fdcheck;
mod kernels;
mod params;
mod run;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, restore_into, save_checkpoint, CheckpointError};
pub use fdcheck::{check_gradients, FdReport};
pub use params::{fan_in_uniform, AdamConfig, Param, ParamStore};
pub use run::{
    accumulate_param_grads, insert_bn_params, update_running_stats, ModelRun, RunMode, RunTrace,
    BN_EPS, BN_MOMENTUM,
};
pub use tape::{BnMode, GradTape, Gradients, Var};
pub use tensor::{numel, Shape, Tensor4};

use thiserror::Error;

/// Errors from tensor construction and tape operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: {axis} disagree ({left} vs {right})")]
    AxisMismatch {
        op: &'static str,
        axis: &'static str,
        left: usize,
        right: usize,
    },
    #[error("{op}: shapes {left:?} and {right:?} are incompatible")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("buffer holds {got} elements but the shape needs {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("{op}: {detail}")]
    Unsupported { op: &'static str, detail: String },
    #[error("value is not on this tape")]
    DetachedValue,
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Shape },
    #[error("parameter {name:?} already registered")]
    DuplicateParam { name: String },
    #[error("no parameter named {name:?}")]
    UnknownParam { name: String },
    #[error("parameter {name:?} has no accumulated gradient")]
    MissingGradient { name: String },
}
