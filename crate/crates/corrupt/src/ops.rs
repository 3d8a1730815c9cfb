use bevbench_geom::{rotation_from_rpy, RigidTransform};
use bevbench_rng::SampleRng;
use bevbench_sim::PointCloud;
use nalgebra::Vector3;

use crate::CorruptError;

fn check_layer_counts(source_layers: usize, layer_target: usize) -> Result<(), CorruptError> {
    if source_layers == 0 || source_layers > usize::from(u16::MAX) + 1 {
        return Err(CorruptError::InvalidSpec(format!(
            "source layer count {source_layers} out of range"
        )));
    }
    if layer_target == 0 {
        return Err(CorruptError::InvalidSpec(
            "layer_target must be at least 1".into(),
        ));
    }
    if layer_target > source_layers {
        return Err(CorruptError::TooManyLayers {
            source_layers,
            target: layer_target,
        });
    }
    Ok(())
}

/// Rings kept when thinning `source_layers` beams down to `layer_target`,
/// spaced uniformly and centered: ring `i` of the result sits at
/// `floor(stride * (i + 1/2))` with `stride = source_layers / layer_target`.
/// 64 layers thinned to 16 keep rings 2, 6, 10, .., 62; 32 thinned to 1
/// keeps ring 16.
pub fn kept_rings(source_layers: usize, layer_target: usize) -> Result<Vec<u16>, CorruptError> {
    check_layer_counts(source_layers, layer_target)?;
    let stride = source_layers as f64 / layer_target as f64;
    Ok((0..layer_target)
        .map(|i| (stride * (i as f64 + 0.5)).floor() as u16)
        .collect())
}

/// Like [`kept_rings`] but with the offset anchored at the middle ring
/// `source_layers / 2` whenever `layer_target` divides `source_layers`.
/// Anchoring makes the kept sets nest along a thinning ladder: every ring
/// kept at 4 layers is also kept at 8, 16, and so on, because all sets
/// contain the anchor and their strides divide each other. When the counts
/// do not divide evenly this falls back to the centered rule.
pub fn kept_rings_nested(
    source_layers: usize,
    layer_target: usize,
) -> Result<Vec<u16>, CorruptError> {
    check_layer_counts(source_layers, layer_target)?;
    if source_layers % layer_target != 0 {
        return kept_rings(source_layers, layer_target);
    }
    let stride = source_layers / layer_target;
    let start = (source_layers / 2) % stride;
    Ok((start..source_layers)
        .step_by(stride)
        .map(|ring| ring as u16)
        .collect())
}

fn filter_rings(
    cloud: &PointCloud,
    source_layers: usize,
    kept: &[u16],
) -> Result<PointCloud, CorruptError> {
    let mut keep = vec![false; source_layers];
    for &ring in kept {
        keep[usize::from(ring)] = true;
    }
    let mut points = Vec::new();
    for p in &cloud.points {
        match keep.get(usize::from(p.ring)) {
            None => {
                return Err(CorruptError::RingOutOfRange {
                    ring: p.ring,
                    source_layers,
                })
            }
            Some(true) => points.push(*p),
            Some(false) => {}
        }
    }
    Ok(PointCloud { points })
}

/// Drops every point whose ring is not in [`kept_rings`], preserving point
/// order. `layer_target == source_layers` returns the cloud unchanged.
pub fn remove_layers(
    cloud: &PointCloud,
    source_layers: usize,
    layer_target: usize,
) -> Result<PointCloud, CorruptError> {
    filter_rings(cloud, source_layers, &kept_rings(source_layers, layer_target)?)
}

/// [`remove_layers`] with the nesting offsets of [`kept_rings_nested`], so a
/// frame thinned to 4 layers contains exactly a subset of the points of the
/// same frame thinned to 16.
pub fn remove_layers_nested(
    cloud: &PointCloud,
    source_layers: usize,
    layer_target: usize,
) -> Result<PointCloud, CorruptError> {
    filter_rings(
        cloud,
        source_layers,
        &kept_rings_nested(source_layers, layer_target)?,
    )
}

/// Keeps each point independently with probability `keep_ratio`, preserving
/// order. Ratio 1.0 returns the cloud unchanged and ratio 0.0 returns the
/// empty cloud; neither consumes the random stream, so the identity case is
/// reproducible without replaying any draws.
pub fn reduce_points(
    cloud: &PointCloud,
    keep_ratio: f64,
    rng: &mut SampleRng,
) -> Result<PointCloud, CorruptError> {
    if !(0.0..=1.0).contains(&keep_ratio) {
        return Err(CorruptError::InvalidSpec(format!(
            "keep_ratio must be in [0, 1], got {keep_ratio}"
        )));
    }
    if keep_ratio == 1.0 {
        return Ok(cloud.clone());
    }
    if keep_ratio == 0.0 {
        return Ok(PointCloud::default());
    }
    let points = cloud
        .points
        .iter()
        .filter(|_| rng.bernoulli(keep_ratio))
        .copied()
        .collect();
    Ok(PointCloud { points })
}

/// Right-composes a random rigid perturbation onto `extrinsic`: the result is
/// `extrinsic` followed in the camera's own frame by a translation with each
/// component uniform in `[-translation_limit, translation_limit]` and a
/// roll/pitch/yaw rotation with each angle uniform in
/// `[-rotation_limit, rotation_limit]`.
///
/// Draw order is fixed (tx, ty, tz, roll, pitch, yaw) and a zero limit skips
/// its draws entirely, so the corresponding part of the pose is returned bit
/// for bit unchanged; with both limits zero the stream is not consumed at all.
pub fn perturb_extrinsic(
    extrinsic: &RigidTransform,
    translation_limit: f64,
    rotation_limit: f64,
    rng: &mut SampleRng,
) -> Result<RigidTransform, CorruptError> {
    for (name, limit) in [
        ("translation_limit", translation_limit),
        ("rotation_limit", rotation_limit),
    ] {
        if !(limit >= 0.0 && limit.is_finite()) {
            return Err(CorruptError::InvalidSpec(format!(
                "{name} must be finite and non-negative, got {limit}"
            )));
        }
    }
    if translation_limit == 0.0 && rotation_limit == 0.0 {
        return Ok(extrinsic.clone());
    }
    let mut draw_triple = |limit: f64| {
        if limit > 0.0 {
            [
                rng.uniform(-limit, limit),
                rng.uniform(-limit, limit),
                rng.uniform(-limit, limit),
            ]
        } else {
            [0.0; 3]
        }
    };
    let [dx, dy, dz] = draw_triple(translation_limit);
    let [roll, pitch, yaw] = draw_triple(rotation_limit);
    let rotation = if rotation_limit > 0.0 {
        extrinsic.rotation * rotation_from_rpy(roll, pitch, yaw)
    } else {
        extrinsic.rotation
    };
    let translation = if translation_limit > 0.0 {
        extrinsic.rotation * Vector3::new(dx, dy, dz) + extrinsic.translation
    } else {
        extrinsic.translation
    };
    Ok(RigidTransform::new(rotation, translation)?)
}
