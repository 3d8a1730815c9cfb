//! The anchor codec must be a true inverse pair: any box whose center lies
//! on the grid encodes at its cell and decodes back to itself.

use bevbench_detector::{decode_cell, encode_box, AnchorSpec};
use bevbench_geom::{wrap_angle, BevGridSpec, Box3D};
use nalgebra::Vector3;
use proptest::prelude::*;
use std::f64::consts::PI;

fn toy_grid() -> BevGridSpec {
    BevGridSpec::new(16.0, 16.0, 32, 32).unwrap()
}

fn roundtrip(b: &Box3D) -> (Vector3<f64>, [f64; 3], f64) {
    let grid = toy_grid();
    let anchor = AnchorSpec::default();
    let cell = grid
        .bev_cell_of(&Vector3::new(b.center.x, b.center.y, 0.0))
        .expect("the box center lies on the grid");
    let reg = encode_box(b, cell, &grid, &anchor);
    decode_cell(&reg, cell, &grid, &anchor)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn encoding_then_decoding_recovers_the_box(
        x in -15.99f64..15.99,
        y in -15.99f64..15.99,
        z in -0.5f64..2.5,
        l in 0.5f64..6.0,
        w in 0.5f64..6.0,
        h in 0.5f64..4.0,
        yaw in -PI..PI,
    ) {
        let b = Box3D::ground_truth(Vector3::new(x, y, z), [l, w, h], yaw, 1).unwrap();
        let (center, size, yaw_out) = roundtrip(&b);
        prop_assert!((center - b.center).norm() < 1e-6, "center drifted to {center:?}");
        for i in 0..3 {
            prop_assert!((size[i] - b.size[i]).abs() < 1e-6, "size {i} drifted to {}", size[i]);
        }
        prop_assert!(wrap_angle(yaw_out - b.yaw).abs() < 1e-6, "yaw {} became {yaw_out}", b.yaw);
    }
}

#[test]
fn yaw_survives_the_wrap_point() {
    for yaw in [PI, -PI, PI - 1e-9, -PI + 1e-9, 3.0 * PI / 2.0] {
        let b = Box3D::ground_truth(Vector3::new(4.25, -3.75, 0.8), [4.0, 2.0, 1.5], yaw, 2)
            .unwrap();
        let (_, _, yaw_out) = roundtrip(&b);
        assert!(
            wrap_angle(yaw_out - b.yaw).abs() < 1e-6,
            "yaw {yaw} (stored {}) decoded to {yaw_out}",
            b.yaw
        );
    }
}
