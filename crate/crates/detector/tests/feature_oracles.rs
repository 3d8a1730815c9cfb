//! Independent recomputations of the two BEV feature extractors: pillar
//! channels against a naive per-cell recount, and the camera lift against
//! pinhole geometry (footprint placement and exact shift covariance).

use std::collections::HashMap;

use bevbench_detector::{lift_camera_to_bev, pillarize, PILLAR_CHANNELS};
use bevbench_geom::{BevGridSpec, Box3D, CameraModel, RigidTransform};
use bevbench_sim::{
    generate_scene, raycast_lidar, render_semantic_image, LidarModel, LidarPoint, Scene,
};
use nalgebra::Vector3;
use std::f64::consts::FRAC_PI_2;

fn toy_grid() -> BevGridSpec {
    BevGridSpec::new(16.0, 16.0, 32, 32).unwrap()
}

/// A camera at (0, 0, 1.6) looking straight down the +x axis with a 90
/// degree horizontal field of view.
fn forward_camera() -> CameraModel {
    let extrinsic =
        RigidTransform::from_rpy_translation(-FRAC_PI_2, 0.0, -FRAC_PI_2, Vector3::new(0.0, 0.0, 1.6));
    CameraModel::new(32.0, 32.0, 32.0, 24.0, 64, 48, extrinsic).unwrap()
}

#[test]
fn pillar_features_match_a_naive_per_cell_recount() {
    let grid = toy_grid();
    let scene = generate_scene(5, "pillar-oracle", &Default::default()).unwrap();
    let cloud = raycast_lidar(&scene, &LidarModel::default_spinning());
    assert!(cloud.len() > 500, "raycast produced a trivial cloud");

    let features = pillarize(&cloud, &grid);
    assert_eq!(features.shape(), [1, PILLAR_CHANNELS, 32, 32]);

    let mut cells: HashMap<(usize, usize), Vec<&LidarPoint>> = HashMap::new();
    for p in &cloud.points {
        if let Some(cell) = grid.bev_cell_of(&Vector3::new(p.x, p.y, p.z)) {
            cells.entry(cell).or_default().push(p);
        }
    }
    assert!(cells.len() > 20, "cloud should cover many cells");

    for r in 0..32 {
        for c in 0..32 {
            let got: Vec<f64> = (0..PILLAR_CHANNELS)
                .map(|ch| features.at(0, ch, r, c))
                .collect();
            let Some(points) = cells.get(&(r, c)) else {
                assert_eq!(got, vec![0.0; PILLAR_CHANNELS], "empty cell ({r},{c})");
                continue;
            };
            let n = points.len() as f64;
            let center = grid.cell_center(r, c);
            let want = [
                (1.0 + n).ln(),
                points.iter().map(|p| p.z).sum::<f64>() / n,
                points.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max),
                points.iter().map(|p| p.intensity).sum::<f64>() / n,
                points.iter().map(|p| p.x - center.x).sum::<f64>() / n,
                points.iter().map(|p| p.y - center.y).sum::<f64>() / n,
            ];
            for (ch, (g, w)) in got.iter().zip(want).enumerate() {
                assert!(
                    (g - w).abs() <= 1e-12,
                    "channel {ch} at ({r},{c}): got {g}, recounted {w}"
                );
            }
        }
    }
}

#[test]
fn lifted_cells_hold_one_hot_averages_or_nothing() {
    let grid = toy_grid();
    let scene = generate_scene(7, "lift-mass", &Default::default()).unwrap();
    let cam = forward_camera();
    let image = render_semantic_image(&scene, &cam, 4).unwrap();
    let features = lift_camera_to_bev(&[image], &[cam], &grid, 4).unwrap();

    let (mut seen, mut unseen) = (0, 0);
    for r in 0..32 {
        for c in 0..32 {
            let sum: f64 = (0..4).map(|ch| features.at(0, ch, r, c)).sum();
            if sum == 0.0 {
                unseen += 1;
            } else {
                assert!(
                    (sum - 1.0).abs() <= 1e-12,
                    "cell ({r},{c}) sums to {sum}, not a one-hot average"
                );
                seen += 1;
            }
        }
    }
    assert!(seen > 100, "the forward camera should cover many cells");
    assert!(unseen > 100, "cells behind the camera should stay empty");
}

#[test]
fn lifted_class_mass_lands_on_the_box_footprint() {
    let grid = toy_grid();
    let scene = Scene {
        frame_key: "footprint".to_string(),
        boxes: vec![
            Box3D::ground_truth(Vector3::new(8.0, 0.0, 0.8), [4.0, 2.0, 1.6], 0.0, 1).unwrap(),
        ],
        clutter: Vec::new(),
        extent: 16.0,
    };
    let cam = forward_camera();
    let image = render_semantic_image(&scene, &cam, 4).unwrap();
    let features = lift_camera_to_bev(&[image], &[cam], &grid, 4).unwrap();

    let under_box = grid.bev_cell_of(&Vector3::new(8.0, 0.0, 0.0)).unwrap();
    assert_eq!(features.at(0, 1, under_box.0, under_box.1), 1.0);
    assert_eq!(features.at(0, 0, under_box.0, under_box.1), 0.0);

    let beside = grid.bev_cell_of(&Vector3::new(8.0, 6.0, 0.0)).unwrap();
    assert_eq!(features.at(0, 0, beside.0, beside.1), 1.0);
    for class in 1..4 {
        assert_eq!(features.at(0, class, beside.0, beside.1), 0.0);
    }

    let behind = grid.bev_cell_of(&Vector3::new(-5.0, 0.0, 0.0)).unwrap();
    for ch in 0..4 {
        assert_eq!(features.at(0, ch, behind.0, behind.1), 0.0);
    }
}

#[test]
fn a_one_cell_calibration_shift_translates_the_lifted_field() {
    let grid = toy_grid();
    let scene = generate_scene(9, "lift-shift", &Default::default()).unwrap();
    let cam = forward_camera();
    let image = render_semantic_image(&scene, &cam, 4).unwrap();

    let shift = Vector3::new(grid.cell_size_x(), 0.0, 0.0);
    let shifted_cam = CameraModel {
        extrinsic: RigidTransform {
            rotation: cam.extrinsic.rotation,
            translation: cam.extrinsic.translation + shift,
        },
        ..cam.clone()
    };

    let base = lift_camera_to_bev(&[image.clone()], &[cam.clone()], &grid, 4).unwrap();
    let moved = lift_camera_to_bev(&[image], &[shifted_cam.clone()], &grid, 4).unwrap();

    let mut compared = 0;
    let mut foreground = 0;
    for r in 1..32 {
        for c in 0..32 {
            let both_in_view = cam.project_point(&grid.cell_center(r - 1, c)).is_some()
                && shifted_cam.project_point(&grid.cell_center(r, c)).is_some();
            if !both_in_view {
                continue;
            }
            compared += 1;
            for ch in 0..4 {
                assert_eq!(
                    moved.at(0, ch, r, c),
                    base.at(0, ch, r - 1, c),
                    "channel {ch} at ({r},{c}) after a one-cell shift"
                );
            }
            if (1..4).any(|ch| base.at(0, ch, r - 1, c) > 0.0) {
                foreground += 1;
            }
        }
    }
    assert!(compared > 200, "only {compared} cells stayed in view");
    assert!(foreground > 10, "only {foreground} foreground cells compared");
}
