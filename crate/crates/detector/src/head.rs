use bevbench_fusion::{make_step, FusionStep, FusionVariant};
use bevbench_rng::SampleRng;
use bevbench_tensor::{fan_in_uniform, insert_bn_params, ModelRun, ParamStore, Var};

use crate::config::DetectorConfig;
use crate::DetectorError;

/// One square prior anchor per cell.
pub const ANCHORS_PER_CELL: usize = 1;
/// Regression channels per anchor: dx, dy, dz, log length, log width,
/// log height, sin yaw, cos yaw.
pub const REG_CHANNELS: usize = 8;

/// Shape of the dense head: a two-layer 3x3 trunk feeding an objectness
/// logit map and a box regression map, both 1x1 convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadConfig {
    pub in_channels: usize,
    pub trunk_channels: usize,
}

/// The detector: a fusion step and the head behind it, with parameters held
/// externally in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct DetectorModel {
    pub fusion: FusionStep,
    pub head: HeadConfig,
}

fn insert_conv(
    store: &mut ParamStore,
    rng: &mut SampleRng,
    name: &str,
    c_out: usize,
    c_in: usize,
    k: usize,
) -> Result<(), DetectorError> {
    let fan_in = c_in * k * k;
    store.insert(
        &format!("{name}.w"),
        fan_in_uniform(rng, [c_out, c_in, k, k], fan_in),
        true,
    )?;
    store.insert(
        &format!("{name}.b"),
        fan_in_uniform(rng, [1, c_out, 1, 1], fan_in),
        true,
    )?;
    Ok(())
}

/// Builds the fusion step for `config.variant` and registers the head
/// parameters sized to that step's output channels.
pub fn build_model(
    config: &DetectorConfig,
    store: &mut ParamStore,
    rng: &mut SampleRng,
) -> Result<DetectorModel, DetectorError> {
    config.validate()?;
    let fusion = make_step(config.variant, &config.fusion, store, rng)?;
    let head = HeadConfig {
        in_channels: fusion.out_channels(),
        trunk_channels: config.trunk_channels,
    };
    let t = head.trunk_channels;
    insert_conv(store, rng, "head.trunk1", t, head.in_channels, 3)?;
    insert_bn_params(store, "head.trunk1_bn", t)?;
    insert_conv(store, rng, "head.trunk2", t, t, 3)?;
    insert_bn_params(store, "head.trunk2_bn", t)?;
    insert_conv(store, rng, "head.obj", ANCHORS_PER_CELL, t, 1)?;
    insert_conv(store, rng, "head.reg", ANCHORS_PER_CELL * REG_CHANNELS, t, 1)?;
    Ok(DetectorModel { fusion, head })
}

impl DetectorModel {
    /// Fuses the two feature streams and runs the head. Returns objectness
    /// logits `(B, 1, H, W)` and box regression `(B, 8, H, W)`.
    pub fn forward(
        &self,
        run: &mut ModelRun,
        lidar: Var,
        camera: Var,
    ) -> Result<(Var, Var), DetectorError> {
        let fused = self.fusion.forward(run, lidar, camera)?;
        let w = run.param("head.trunk1.w")?;
        let b = run.param("head.trunk1.b")?;
        let t1 = run.tape.conv2d(fused, w, b, 1, 1)?;
        let t1 = run.batch_norm(t1, "head.trunk1_bn")?;
        let t1 = run.tape.relu(t1);
        let w = run.param("head.trunk2.w")?;
        let b = run.param("head.trunk2.b")?;
        let t2 = run.tape.conv2d(t1, w, b, 1, 1)?;
        let t2 = run.batch_norm(t2, "head.trunk2_bn")?;
        let t2 = run.tape.relu(t2);
        let w = run.param("head.obj.w")?;
        let b = run.param("head.obj.b")?;
        let obj = run.tape.conv2d(t2, w, b, 1, 0)?;
        let w = run.param("head.reg.w")?;
        let b = run.param("head.reg.b")?;
        let reg = run.tape.conv2d(t2, w, b, 1, 0)?;
        Ok((obj, reg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bevbench_tensor::{GradTape, RunMode, Tensor4};

    fn toy(variant: FusionVariant) -> DetectorConfig {
        DetectorConfig::toy(variant)
    }

    #[test]
    fn head_shapes_follow_the_fusion_variant() {
        for variant in FusionVariant::ALL {
            if variant == FusionVariant::FullyConnected {
                continue;
            }
            let config = toy(variant);
            let mut store = ParamStore::new();
            let mut rng = SampleRng::new(3, "head-test", variant.name());
            let model = build_model(&config, &mut store, &mut rng).unwrap();
            let mut tape = GradTape::new();
            let mut run = ModelRun::new(&mut tape, &store, RunMode::Train);
            let l = run.tape.leaf(Tensor4::zeros([2, 6, 32, 32]));
            let c = run.tape.leaf(Tensor4::zeros([2, 4, 32, 32]));
            let (obj, reg) = model.forward(&mut run, l, c).unwrap();
            drop(run);
            assert_eq!(tape.value(obj).shape(), [2, 1, 32, 32], "{variant}");
            assert_eq!(tape.value(reg).shape(), [2, 8, 32, 32], "{variant}");
        }
    }

    #[test]
    fn head_parameters_register_under_their_own_prefix() {
        let mut store = ParamStore::new();
        let mut rng = SampleRng::new(4, "head-test", "prefixes");
        build_model(&toy(FusionVariant::Conv), &mut store, &mut rng).unwrap();
        let head_names: Vec<&str> = store
            .names()
            .filter(|n| n.starts_with("head."))
            .collect();
        assert_eq!(head_names.len(), 4 * 2 + 2 * 4);
        assert!(store.contains("conv.fuse.w"));
    }

    #[test]
    fn same_seed_rebuilds_identical_parameters() {
        let build = || {
            let mut store = ParamStore::new();
            let mut rng = SampleRng::new(5, "head-test", "determinism");
            build_model(&toy(FusionVariant::ConvEdSe), &mut store, &mut rng).unwrap();
            store
        };
        let (a, b) = (build(), build());
        for name in a.names() {
            let left = a.value(name).unwrap().data();
            let right = b.value(name).unwrap().data();
            assert_eq!(
                left.iter().map(|v| v.to_bits()).collect::<Vec<u64>>(),
                right.iter().map(|v| v.to_bits()).collect::<Vec<u64>>(),
                "{name}"
            );
        }
    }
}
