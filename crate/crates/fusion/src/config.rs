use serde::{Deserialize, Serialize};

use crate::FusionError;

/// How the three branch outputs of `conv_ed_se` are merged before the SE
/// block: concatenated to `3*C_f` channels (default, keeps the three
/// encodings separable for the gate) or summed back to `C_f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchCombine {
    Concat,
    Sum,
}

/// Shapes and hyperparameters shared by every fusion step.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// LiDAR feature channels.
    pub c1: usize,
    /// Camera feature channels.
    pub c2: usize,
    /// Fused feature channels.
    pub c_f: usize,
    pub h: usize,
    pub w: usize,
    pub se_reduction: usize,
    /// Side length of the fusion convolution kernel.
    pub kernel: usize,
    /// Output width of the fully connected variant's dense layer; pinned to
    /// `c_f * h * w` so the dense output reshapes exactly to the fused grid.
    pub fc_hidden: usize,
    /// Largest dense layer the fully connected variant may allocate.
    pub fc_param_budget: usize,
    pub branch_combine: BranchCombine,
}

pub(crate) const DEFAULT_FC_BUDGET: usize = 10_000_000;

impl FusionConfig {
    /// Desk-scale defaults around the given feature sizes: 3x3 fusion
    /// kernel, SE reduction 2 (small channel counts degenerate under the
    /// canonical 16), concatenating branch combiner.
    pub fn desk(c1: usize, c2: usize, c_f: usize, h: usize, w: usize) -> Self {
        FusionConfig {
            c1,
            c2,
            c_f,
            h,
            w,
            se_reduction: 2,
            kernel: 3,
            fc_hidden: c_f * h * w,
            fc_param_budget: DEFAULT_FC_BUDGET,
            branch_combine: BranchCombine::Concat,
        }
    }

    /// The published full-scale shape: 384 LiDAR and 256 camera channels on
    /// a 200x200 BEV grid, fused back down to the LiDAR channel count.
    pub fn paper_scale() -> Self {
        FusionConfig {
            se_reduction: 16,
            ..Self::desk(384, 256, 384, 200, 200)
        }
    }

    /// True for configs at or above the published grid size; reports tag
    /// such rows since only construction, not training, is supported there.
    pub fn is_paper_scale(&self) -> bool {
        self.h * self.w >= 200 * 200
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let invalid = |message: String| Err(FusionError::InvalidConfig(message));
        for (name, value) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("c_f", self.c_f),
            ("h", self.h),
            ("w", self.w),
            ("se_reduction", self.se_reduction),
            ("kernel", self.kernel),
        ] {
            if value == 0 {
                return invalid(format!("{name} must be positive"));
            }
        }
        if self.h % 2 != 0 || self.w % 2 != 0 {
            return invalid(format!(
                "spatial size {}x{} must be even for the encoder-decoder paths",
                self.h, self.w
            ));
        }
        if self.kernel % 2 == 0 {
            return invalid(format!("kernel {} must be odd", self.kernel));
        }
        if self.fc_hidden != self.c_f * self.h * self.w {
            return invalid(format!(
                "fc_hidden {} must equal c_f*h*w = {}",
                self.fc_hidden,
                self.c_f * self.h * self.w
            ));
        }
        Ok(())
    }
}

/// The seven fusion steps, named after the rows of the robustness sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionVariant {
    Concat,
    Add,
    Conv,
    FullyConnected,
    ConvEd,
    ConvSe,
    ConvEdSe,
}

impl FusionVariant {
    pub const ALL: [FusionVariant; 7] = [
        FusionVariant::Concat,
        FusionVariant::Add,
        FusionVariant::Conv,
        FusionVariant::FullyConnected,
        FusionVariant::ConvEd,
        FusionVariant::ConvSe,
        FusionVariant::ConvEdSe,
    ];

    /// The config-file and parameter-prefix name of this variant.
    pub fn name(&self) -> &'static str {
        match self {
            FusionVariant::Concat => "concat",
            FusionVariant::Add => "add",
            FusionVariant::Conv => "conv",
            FusionVariant::FullyConnected => "fully_connected",
            FusionVariant::ConvEd => "conv_ed",
            FusionVariant::ConvSe => "conv_se",
            FusionVariant::ConvEdSe => "conv_ed_se",
        }
    }

    pub fn parse(name: &str) -> Result<Self, FusionError> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| FusionError::UnknownVariant(name.to_string()))
    }
}

impl std::fmt::Display for FusionVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
