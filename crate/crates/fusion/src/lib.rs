//! Seven interchangeable fusion steps that merge a LiDAR BEV feature tensor
//! with a camera BEV feature tensor into one fused BEV tensor.
//!
//! The family spans parameter-free concatenation and addition, a
//! channel-reducing convolution, a fully connected layer (desk scale only),
//! an encoder-decoder refinement without a skip path, the convolution plus
//! squeeze-and-excitation baseline, and the full three-branch
//! encoder-decoder with SE gating. Every step exposes the same
//! `(B, C1, H, W) x (B, C2, H, W) -> (B, C_out, H, W)` interface so a sweep
//! can swap them behind one detector.

mod config;
mod step;

pub use config::{BranchCombine, FusionConfig, FusionVariant};
pub use step::{make_step, FusionStep};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
    #[error("unknown fusion variant {0:?}")]
    UnknownVariant(String),
    #[error(
        "{variant} needs {needed} dense parameters, over the {budget} budget; \
         this variant is only feasible at desk scale"
    )]
    ParameterBudget {
        variant: &'static str,
        needed: usize,
        budget: usize,
    },
    #[error("bad fusion input: {0}")]
    Input(String),
    #[error(transparent)]
    Tensor(#[from] bevbench_tensor::TensorError),
}
