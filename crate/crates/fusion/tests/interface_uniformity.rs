//! Every fusion step honors the same interface: inputs `(B, C1, H, W)` and
//! `(B, C2, H, W)` in, output `(B, out_channels, H, W)` out, in both batch
//! norm modes, deterministically, for any valid config.

use bevbench_fusion::{make_step, BranchCombine, FusionConfig, FusionStep, FusionVariant};
use bevbench_rng::SampleRng;
use bevbench_tensor::{GradTape, ModelRun, ParamStore, RunMode, Tensor4};

fn random_input(stage: &str, shape: [usize; 4]) -> Tensor4 {
    let mut rng = SampleRng::new(31, "uniformity-inputs", stage);
    let data = (0..bevbench_tensor::numel(shape))
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    Tensor4::from_vec(shape, data).unwrap()
}

fn forward(
    step: &FusionStep,
    store: &ParamStore,
    mode: RunMode,
    l: &Tensor4,
    c: &Tensor4,
) -> Tensor4 {
    let mut tape = GradTape::new();
    let mut run = ModelRun::new(&mut tape, store, mode);
    let lv = run.tape.leaf(l.clone());
    let cv = run.tape.leaf(c.clone());
    let out = step.forward(&mut run, lv, cv).unwrap();
    drop(run);
    tape.value(out).clone()
}

fn bits(t: &Tensor4) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

fn shape_configs() -> Vec<FusionConfig> {
    let mut five = FusionConfig::desk(8, 2, 6, 12, 6);
    five.kernel = 5;
    let mut summed = FusionConfig::desk(6, 4, 8, 8, 8);
    summed.branch_combine = BranchCombine::Sum;
    vec![
        FusionConfig::desk(6, 4, 8, 8, 8),
        FusionConfig::desk(4, 4, 4, 4, 4),
        five,
        summed,
    ]
}

#[test]
fn every_variant_maps_the_two_streams_to_its_declared_output_shape() {
    for (i, config) in shape_configs().iter().enumerate() {
        for variant in FusionVariant::ALL {
            let mut store = ParamStore::new();
            let mut rng = SampleRng::new(17, "uniformity-params", variant.name());
            let step = make_step(variant, config, &mut store, &mut rng).unwrap();
            for batch in [1, 3] {
                let l = random_input(&format!("l-{i}-{batch}"), [batch, config.c1, config.h, config.w]);
                let c = random_input(&format!("c-{i}-{batch}"), [batch, config.c2, config.h, config.w]);
                for mode in [RunMode::Train, RunMode::Eval] {
                    let out = forward(&step, &store, mode, &l, &c);
                    assert_eq!(
                        out.shape(),
                        [batch, step.out_channels(), config.h, config.w],
                        "{variant} config {i} batch {batch} {mode:?}"
                    );
                    assert!(
                        out.data().iter().all(|v| v.is_finite()),
                        "{variant} config {i} produced non-finite values"
                    );
                }
            }
        }
    }
}

#[test]
fn rebuilding_from_the_same_seed_reproduces_the_forward_pass_bitwise() {
    let config = FusionConfig::desk(6, 4, 8, 8, 8);
    let l = random_input("det-l", [2, 6, 8, 8]);
    let c = random_input("det-c", [2, 4, 8, 8]);
    for variant in FusionVariant::ALL {
        let run_once = |mode: RunMode| {
            let mut store = ParamStore::new();
            let mut rng = SampleRng::new(23, "uniformity-det", variant.name());
            let step = make_step(variant, &config, &mut store, &mut rng).unwrap();
            forward(&step, &store, mode, &l, &c)
        };
        for mode in [RunMode::Train, RunMode::Eval] {
            assert_eq!(
                bits(&run_once(mode)),
                bits(&run_once(mode)),
                "{variant} {mode:?}"
            );
        }
    }
}

#[test]
fn eval_mode_uses_the_running_statistics() {
    let config = FusionConfig::desk(6, 4, 8, 8, 8);
    let mut store = ParamStore::new();
    let mut rng = SampleRng::new(29, "uniformity-eval", "conv");
    let step = make_step(FusionVariant::Conv, &config, &mut store, &mut rng).unwrap();
    let l = random_input("eval-l", [1, 6, 8, 8]);
    let c = random_input("eval-c", [1, 4, 8, 8]);

    let before = forward(&step, &store, RunMode::Eval, &l, &c);
    let mean = Tensor4::filled([1, 8, 1, 1], 0.3);
    store.set_value("conv.fuse_bn.running_mean", mean).unwrap();
    let after = forward(&step, &store, RunMode::Eval, &l, &c);
    assert_ne!(bits(&before), bits(&after));

    let train = forward(&step, &store, RunMode::Train, &l, &c);
    assert_ne!(
        bits(&train),
        bits(&after),
        "train mode must normalize by batch statistics instead"
    );
}

#[test]
fn paper_scale_constructs_for_every_variant_except_the_dense_one() {
    let config = FusionConfig::paper_scale();
    for variant in FusionVariant::ALL {
        let mut store = ParamStore::new();
        let mut rng = SampleRng::new(41, "uniformity-scale", variant.name());
        let result = make_step(variant, &config, &mut store, &mut rng);
        if variant == FusionVariant::FullyConnected {
            assert!(result.is_err(), "the dense variant cannot fit the budget at full scale");
        } else {
            let step = result.unwrap();
            assert_eq!(step.expected_param_count(), store.trainable_param_count(), "{variant}");
        }
    }
}
