use std::fs;
use std::path::Path;

use bevbench_rng::SampleRng;
use bevbench_sim::{list_frames, read_frame, write_frame, FrameData};
use serde::{Deserialize, Serialize};

use crate::ops::{perturb_extrinsic, reduce_points, remove_layers_nested};
use crate::spec::{CorruptionKind, CorruptionSpec};
use crate::CorruptError;

/// Stage tag of the point-reduction random stream.
pub const POINT_REDUCTION_TAG: &str = "point-reduction";

/// Stage tag of the misalignment stream for one camera. Each camera gets its
/// own stream so adding or reordering cameras never shifts another camera's
/// perturbation.
pub fn misalignment_tag(camera_index: usize) -> String {
    format!("misalign-cam{camera_index}")
}

/// Applies `spec` to one frame and returns the corrupted copy. Images and
/// boxes pass through untouched; layer removal and point reduction replace
/// the cloud, misalignment replaces the camera extrinsics. `source_layers`
/// is the beam count of the sensor that produced the cloud.
///
/// Layer removal uses the nesting offsets of
/// [`crate::kept_rings_nested`], so thinning the same frame to fewer and
/// fewer layers only ever removes points.
pub fn apply(
    frame: &FrameData,
    source_layers: usize,
    spec: &CorruptionSpec,
) -> Result<FrameData, CorruptError> {
    spec.validate()?;
    let mut out = frame.clone();
    match spec.kind {
        CorruptionKind::None => {}
        CorruptionKind::LayerRemoval => {
            let target = spec.layer_target.expect("validated");
            out.cloud = remove_layers_nested(&frame.cloud, source_layers, target)?;
        }
        CorruptionKind::PointReduction => {
            let ratio = spec.keep_ratio.expect("validated");
            let mut rng = SampleRng::new(spec.global_seed, &frame.key, POINT_REDUCTION_TAG);
            out.cloud = reduce_points(&frame.cloud, ratio, &mut rng)?;
        }
        CorruptionKind::Misalignment => {
            let translation = spec.translation_limit.expect("validated");
            let rotation = spec.rotation_limit.expect("validated");
            for (i, camera) in out.cameras.iter_mut().enumerate() {
                let mut rng =
                    SampleRng::new(spec.global_seed, &frame.key, &misalignment_tag(i));
                camera.extrinsic =
                    perturb_extrinsic(&camera.extrinsic, translation, rotation, &mut rng)?;
            }
        }
    }
    Ok(out)
}

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Record written next to a corrupted dataset so the corruption can be
/// reproduced or audited later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionManifest {
    pub spec: CorruptionSpec,
    pub source_layers: usize,
    pub frames: Vec<String>,
}

/// Reads every frame under `input_root`, applies `spec`, and writes the
/// results under `output_root` together with a [`MANIFEST_FILE`]. Frames are
/// corrupted independently of each other, keyed by their own frame key, so
/// the output does not depend on processing order.
pub fn corrupt_dataset(
    input_root: &Path,
    output_root: &Path,
    source_layers: usize,
    spec: &CorruptionSpec,
) -> Result<CorruptionManifest, CorruptError> {
    spec.validate()?;
    let frames = list_frames(input_root)?;
    fs::create_dir_all(output_root)?;
    for key in &frames {
        let frame = read_frame(input_root, key)?;
        let corrupted = apply(&frame, source_layers, spec)?;
        write_frame(output_root, &corrupted)?;
    }
    let manifest = CorruptionManifest {
        spec: spec.clone(),
        source_layers,
        frames,
    };
    fs::write(
        output_root.join(MANIFEST_FILE),
        toml::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

/// Parses the manifest written by [`corrupt_dataset`].
pub fn read_manifest(output_root: &Path) -> Result<CorruptionManifest, CorruptError> {
    let text = fs::read_to_string(output_root.join(MANIFEST_FILE))?;
    Ok(toml::from_str(&text)?)
}
