use bevbench_fusion::{FusionConfig, FusionVariant};
use bevbench_geom::BevGridSpec;

use crate::features::PILLAR_CHANNELS;
use crate::targets::AnchorSpec;
use crate::DetectorError;

/// Everything needed to build and run one detector: the BEV grid, the
/// fusion step under study, the head width, the anchor prior, and the
/// decode thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub grid: BevGridSpec,
    pub variant: FusionVariant,
    pub fusion: FusionConfig,
    pub trunk_channels: usize,
    pub anchor: AnchorSpec,
    pub score_threshold: f64,
    pub nms_iou: f64,
}

impl DetectorConfig {
    /// The desk-scale detector: a 32x32 grid over ±16 m, 6 pillar channels,
    /// 4 semantic channels, 8 fused channels, and a 16-channel trunk.
    pub fn toy(variant: FusionVariant) -> Self {
        DetectorConfig {
            grid: BevGridSpec::new(16.0, 16.0, 32, 32).expect("toy grid is valid"),
            variant,
            fusion: FusionConfig::desk(PILLAR_CHANNELS, 4, 8, 32, 32),
            trunk_channels: 16,
            anchor: AnchorSpec::default(),
            score_threshold: 0.3,
            nms_iou: 0.5,
        }
    }

    pub fn camera_channels(&self) -> usize {
        self.fusion.c2
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        self.fusion.validate()?;
        if self.fusion.c1 != PILLAR_CHANNELS {
            return Err(DetectorError::InvalidConfig(format!(
                "fusion c1 = {} but the pillar branch always produces {} channels",
                self.fusion.c1, PILLAR_CHANNELS
            )));
        }
        if self.fusion.h != self.grid.rows || self.fusion.w != self.grid.cols {
            return Err(DetectorError::InvalidConfig(format!(
                "fusion grid {}x{} does not match the BEV grid {}x{}",
                self.fusion.h, self.fusion.w, self.grid.rows, self.grid.cols
            )));
        }
        if self.trunk_channels == 0 {
            return Err(DetectorError::InvalidConfig(
                "trunk_channels must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(DetectorError::InvalidConfig(format!(
                "score_threshold {} outside [0, 1]",
                self.score_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.nms_iou) {
            return Err(DetectorError::InvalidConfig(format!(
                "nms_iou {} outside [0, 1]",
                self.nms_iou
            )));
        }
        self.anchor.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_toy_config_is_valid_for_every_variant() {
        for variant in FusionVariant::ALL {
            DetectorConfig::toy(variant).validate().unwrap();
        }
    }

    #[test]
    fn mismatched_grid_and_fusion_shapes_are_rejected() {
        let mut cfg = DetectorConfig::toy(FusionVariant::Conv);
        cfg.fusion.h = 16;
        cfg.fusion.fc_hidden = cfg.fusion.c_f * 16 * cfg.fusion.w;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn wrong_pillar_channel_count_is_rejected() {
        let mut cfg = DetectorConfig::toy(FusionVariant::Conv);
        cfg.fusion.c1 = 5;
        assert!(cfg.validate().is_err());
    }
}
