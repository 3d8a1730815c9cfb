//! Invariant sweep over a large scene population.

use bevbench_geom::rotated_iou_bev;
use bevbench_sim::{generate_scene, SceneConfig};

#[test]
fn five_hundred_scenes_satisfy_the_placement_invariants() {
    let cfg = SceneConfig::default();
    for i in 0..500 {
        let scene = generate_scene(77, &format!("sweep-{i:03}"), &cfg).unwrap();
        let all: Vec<_> = scene.boxes.iter().chain(&scene.clutter).collect();
        for (j, a) in all.iter().enumerate() {
            assert!(
                a.center.x.abs() <= scene.extent && a.center.y.abs() <= scene.extent,
                "scene {i}: box {j} outside extent"
            );
            for b in &all[j + 1..] {
                let iou = rotated_iou_bev(a, b);
                assert!(iou < 0.05, "scene {i}: overlap {iou} between placed boxes");
            }
        }
    }
}
