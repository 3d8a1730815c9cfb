use serde::{Deserialize, Serialize};

use crate::CorruptError;

/// Which corruption to apply. `None` leaves the frame untouched and exists so
/// that baseline rows can be driven through the same pipeline as corrupted
/// ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    None,
    LayerRemoval,
    PointReduction,
    Misalignment,
}

/// A fully specified corruption. Each kind consumes a fixed subset of the
/// optional fields and [`CorruptionSpec::validate`] rejects specs where any
/// other field is set, so a spec read back from a config file cannot silently
/// carry ignored parameters.
///
/// The same `(spec, frame_key)` pair always produces the same corrupted
/// frame; `global_seed` is the only source of variation between repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Number of beam layers to keep (`layer_removal` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_target: Option<usize>,
    /// Probability of keeping each point (`point_reduction` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keep_ratio: Option<f64>,
    /// Per-axis translation bound in meters (`misalignment` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_limit: Option<f64>,
    /// Per-angle rotation bound in radians (`misalignment` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_limit: Option<f64>,
    pub global_seed: u64,
}

impl CorruptionSpec {
    pub fn none(global_seed: u64) -> Self {
        Self {
            kind: CorruptionKind::None,
            layer_target: None,
            keep_ratio: None,
            translation_limit: None,
            rotation_limit: None,
            global_seed,
        }
    }

    pub fn layer_removal(layer_target: usize, global_seed: u64) -> Self {
        Self {
            layer_target: Some(layer_target),
            ..Self::none(global_seed)
        }
        .with_kind(CorruptionKind::LayerRemoval)
    }

    pub fn point_reduction(keep_ratio: f64, global_seed: u64) -> Self {
        Self {
            keep_ratio: Some(keep_ratio),
            ..Self::none(global_seed)
        }
        .with_kind(CorruptionKind::PointReduction)
    }

    pub fn misalignment(translation_limit: f64, rotation_limit: f64, global_seed: u64) -> Self {
        Self {
            translation_limit: Some(translation_limit),
            rotation_limit: Some(rotation_limit),
            ..Self::none(global_seed)
        }
        .with_kind(CorruptionKind::Misalignment)
    }

    fn with_kind(mut self, kind: CorruptionKind) -> Self {
        self.kind = kind;
        self
    }

    /// Checks that exactly the fields consumed by `kind` are present and that
    /// their values are in range.
    pub fn validate(&self) -> Result<(), CorruptError> {
        let invalid = |message: String| Err(CorruptError::InvalidSpec(message));
        let required: &[&str] = match self.kind {
            CorruptionKind::None => &[],
            CorruptionKind::LayerRemoval => &["layer_target"],
            CorruptionKind::PointReduction => &["keep_ratio"],
            CorruptionKind::Misalignment => &["translation_limit", "rotation_limit"],
        };
        let present = [
            ("layer_target", self.layer_target.is_some()),
            ("keep_ratio", self.keep_ratio.is_some()),
            ("translation_limit", self.translation_limit.is_some()),
            ("rotation_limit", self.rotation_limit.is_some()),
        ];
        for (field, is_set) in present {
            if required.contains(&field) && !is_set {
                return invalid(format!("{:?} requires {field}", self.kind));
            }
            if !required.contains(&field) && is_set {
                return invalid(format!("{:?} does not take {field}", self.kind));
            }
        }
        if let Some(target) = self.layer_target {
            if target == 0 {
                return invalid("layer_target must be at least 1".into());
            }
        }
        if let Some(ratio) = self.keep_ratio {
            if !(0.0..=1.0).contains(&ratio) {
                return invalid(format!("keep_ratio must be in [0, 1], got {ratio}"));
            }
        }
        for (field, value) in [
            ("translation_limit", self.translation_limit),
            ("rotation_limit", self.rotation_limit),
        ] {
            if let Some(limit) = value {
                if !(limit >= 0.0 && limit.is_finite()) {
                    return invalid(format!(
                        "{field} must be finite and non-negative, got {limit}"
                    ));
                }
            }
        }
        Ok(())
    }
}
