//! Corruption must be a pure function of `(frame, spec)`: the same inputs
//! give bitwise-identical outputs no matter how often, in what order, or on
//! how many threads the work runs.

use std::thread;

use bevbench_corrupt::{apply, CorruptionSpec};
use bevbench_sim::{
    default_rig, generate_scene, raycast_lidar, render_semantic_image, FrameData, LidarModel,
};

fn toy_frame(seed: u64, key: &str) -> FrameData {
    let scene = generate_scene(seed, key, &Default::default()).unwrap();
    let cloud = raycast_lidar(&scene, &LidarModel::default_spinning());
    let cameras = default_rig(64, 48);
    let images = cameras
        .iter()
        .map(|cam| render_semantic_image(&scene, cam, 4).unwrap())
        .collect();
    FrameData {
        key: key.to_string(),
        cloud,
        images,
        cameras,
        boxes: scene.boxes,
    }
}

fn frame_bits(frame: &FrameData) -> Vec<u64> {
    let mut bits: Vec<u64> = frame
        .cloud
        .points
        .iter()
        .flat_map(|p| {
            [
                p.x.to_bits(),
                p.y.to_bits(),
                p.z.to_bits(),
                p.intensity.to_bits(),
                u64::from(p.ring),
            ]
        })
        .collect();
    for cam in &frame.cameras {
        bits.extend(
            cam.extrinsic
                .rotation
                .iter()
                .chain(cam.extrinsic.translation.iter())
                .map(|v| v.to_bits()),
        );
    }
    bits
}

fn all_specs() -> Vec<CorruptionSpec> {
    vec![
        CorruptionSpec::none(17),
        CorruptionSpec::layer_removal(4, 17),
        CorruptionSpec::point_reduction(0.5, 17),
        CorruptionSpec::misalignment(1.0, 0.0175, 17),
    ]
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let frame = toy_frame(2, "frame-000");
    for spec in all_specs() {
        let first = apply(&frame, 32, &spec).unwrap();
        for _ in 0..3 {
            let again = apply(&frame, 32, &spec).unwrap();
            assert_eq!(frame_bits(&again), frame_bits(&first), "{:?}", spec.kind);
        }
    }
}

#[test]
fn worker_count_and_order_do_not_change_the_output() {
    let keys: Vec<String> = (0..8).map(|i| format!("frame-{i:03}")).collect();
    let frames: Vec<FrameData> = keys.iter().map(|k| toy_frame(2, k)).collect();
    let spec = CorruptionSpec::point_reduction(0.5, 17);

    let serial: Vec<Vec<u64>> = frames
        .iter()
        .map(|f| frame_bits(&apply(f, 32, &spec).unwrap()))
        .collect();

    let mut reversed: Vec<Vec<u64>> = frames
        .iter()
        .rev()
        .map(|f| frame_bits(&apply(f, 32, &spec).unwrap()))
        .collect();
    reversed.reverse();
    assert_eq!(reversed, serial);

    for workers in [2, 4] {
        let mut parallel: Vec<Option<Vec<u64>>> = vec![None; frames.len()];
        thread::scope(|scope| {
            let chunk = frames.len().div_ceil(workers);
            for (slot, work) in parallel.chunks_mut(chunk).zip(frames.chunks(chunk)) {
                let spec = &spec;
                scope.spawn(move || {
                    for (out, frame) in slot.iter_mut().zip(work) {
                        *out = Some(frame_bits(&apply(frame, 32, spec).unwrap()));
                    }
                });
            }
        });
        let parallel: Vec<Vec<u64>> = parallel.into_iter().map(Option::unwrap).collect();
        assert_eq!(parallel, serial, "{workers} workers");
    }
}

#[test]
fn thinning_ladder_only_ever_removes_points() {
    fn cloud_bits(frame: &FrameData) -> Vec<[u64; 5]> {
        frame
            .cloud
            .points
            .iter()
            .map(|p| {
                [
                    p.x.to_bits(),
                    p.y.to_bits(),
                    p.z.to_bits(),
                    p.intensity.to_bits(),
                    u64::from(p.ring),
                ]
            })
            .collect()
    }

    let frame = toy_frame(5, "frame-000");
    let mut previous = frame.clone();
    for target in [16, 4, 1] {
        let thinned = apply(&frame, 32, &CorruptionSpec::layer_removal(target, 17)).unwrap();
        assert!(thinned.cloud.len() < previous.cloud.len());
        let fine: std::collections::HashSet<[u64; 5]> = cloud_bits(&previous).into_iter().collect();
        assert!(
            cloud_bits(&thinned).iter().all(|p| fine.contains(p)),
            "thinning to {target} layers introduced new points"
        );
        previous = thinned;
    }
}
