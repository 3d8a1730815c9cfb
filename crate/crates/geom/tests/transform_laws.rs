//! Group-law properties of rigid transforms and a quaternion-composition
//! oracle for the rpy rotation builder.

use bevbench_geom::{rotation_from_rpy, RigidTransform};
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -3.1..3.1f64
}

fn coord() -> impl Strategy<Value = f64> {
    -50.0..50.0f64
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (angle(), angle(), angle(), coord(), coord(), coord()).prop_map(|(r, p, y, tx, ty, tz)| {
        RigidTransform::from_rpy_translation(r, p, y, Vector3::new(tx, ty, tz))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn compose_is_associative(a in transform(), b in transform(), c in transform()) {
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        prop_assert!((left.rotation - right.rotation).abs().max() < 1e-9);
        prop_assert!((left.translation - right.translation).abs().max() < 1e-9);
    }

    #[test]
    fn inverse_is_two_sided(t in transform()) {
        for round in [t.compose(&t.inverse()), t.inverse().compose(&t)] {
            prop_assert!((round.rotation - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!(round.translation.abs().max() < 1e-9);
        }
    }

    #[test]
    fn rpy_rotation_matches_the_quaternion_oracle(r in angle(), p in angle(), y in angle()) {
        let direct = rotation_from_rpy(r, p, y);
        let oracle = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), y)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), p)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), r);
        let diff = direct - oracle.to_rotation_matrix().into_inner();
        prop_assert!(diff.abs().max() < 1e-10);
    }

    #[test]
    fn rpy_rotations_are_orthonormal(r in angle(), p in angle(), y in angle()) {
        let m = rotation_from_rpy(r, p, y);
        let gram = m.transpose() * m;
        prop_assert!((gram - Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
    }
}
