//! Monte Carlo oracles for the oriented-box overlap measures. Intersection
//! mass is estimated by jittered stratified sampling over the bounding-box
//! intersection of each pair, which keeps the estimator error well inside the
//! asserted tolerances; operand areas and volumes are exact by construction.

use bevbench_geom::{iou_3d, rotated_iou_bev, Box3D};
use bevbench_rng::SampleRng;
use nalgebra::Vector3;

fn random_box(rng: &mut SampleRng, cx: f64, cy: f64) -> Box3D {
    Box3D::ground_truth(
        Vector3::new(cx, cy, rng.uniform(-0.5, 0.5)),
        [
            rng.uniform(1.5, 4.5),
            rng.uniform(1.5, 4.5),
            rng.uniform(1.2, 3.0),
        ],
        rng.uniform(-std::f64::consts::PI, std::f64::consts::PI),
        0,
    )
    .unwrap()
}

fn random_pair(rng: &mut SampleRng) -> (Box3D, Box3D) {
    let a = random_box(rng, 0.0, 0.0);
    let bx = rng.uniform(-3.0, 3.0);
    let by = rng.uniform(-3.0, 3.0);
    let b = random_box(rng, bx, by);
    (a, b)
}

struct BevCheck {
    cx: f64,
    cy: f64,
    cos: f64,
    sin: f64,
    hl: f64,
    hw: f64,
}

impl BevCheck {
    fn new(b: &Box3D) -> Self {
        let (sin, cos) = b.yaw.sin_cos();
        Self {
            cx: b.center.x,
            cy: b.center.y,
            cos,
            sin,
            hl: b.size[0] / 2.0,
            hw: b.size[1] / 2.0,
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let lx = self.cos * dx + self.sin * dy;
        let ly = -self.sin * dx + self.cos * dy;
        lx.abs() <= self.hl && ly.abs() <= self.hw
    }
}

fn bev_bounds(b: &Box3D) -> [f64; 4] {
    let corners = b.corners_bev();
    let mut bounds = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for [x, y] in corners {
        bounds[0] = bounds[0].min(x);
        bounds[1] = bounds[1].max(x);
        bounds[2] = bounds[2].min(y);
        bounds[3] = bounds[3].max(y);
    }
    bounds
}

#[test]
fn rotated_iou_matches_a_million_sample_monte_carlo_estimate() {
    let mut rng = SampleRng::new(41, "overlap", "bev-mc");
    for pair in 0..1000 {
        let (a, b) = random_pair(&mut rng);
        let iou = rotated_iou_bev(&a, &b);
        assert!((0.0..=1.0).contains(&iou), "pair {pair}: iou {iou}");
        assert!(
            (iou - rotated_iou_bev(&b, &a)).abs() < 1e-12,
            "pair {pair}: asymmetric"
        );

        let ba = bev_bounds(&a);
        let bb = bev_bounds(&b);
        let x0 = ba[0].max(bb[0]);
        let x1 = ba[1].min(bb[1]);
        let y0 = ba[2].max(bb[2]);
        let y1 = ba[3].min(bb[3]);
        if x0 >= x1 || y0 >= y1 {
            assert_eq!(iou, 0.0, "pair {pair}: disjoint bounds but nonzero iou");
            continue;
        }

        let ca = BevCheck::new(&a);
        let cb = BevCheck::new(&b);
        const N: usize = 1000;
        let (dx, dy) = ((x1 - x0) / N as f64, (y1 - y0) / N as f64);
        let mut hits = 0u64;
        for i in 0..N {
            for j in 0..N {
                let x = x0 + (i as f64 + rng.next_f64()) * dx;
                let y = y0 + (j as f64 + rng.next_f64()) * dy;
                if ca.contains(x, y) && cb.contains(x, y) {
                    hits += 1;
                }
            }
        }
        let inter = hits as f64 / (N * N) as f64 * (x1 - x0) * (y1 - y0);
        let mc = inter / (a.bev_area() + b.bev_area() - inter);
        assert!(
            (iou - mc).abs() < 1e-3,
            "pair {pair}: clipped {iou} vs monte carlo {mc}"
        );
    }
}

#[test]
fn volumetric_iou_matches_a_jittered_voxel_grid_estimate() {
    let mut rng = SampleRng::new(42, "overlap", "vol-mc");
    for pair in 0..50 {
        let (a, b) = random_pair(&mut rng);
        let iou = iou_3d(&a, &b);
        assert!((0.0..=1.0).contains(&iou), "pair {pair}: iou {iou}");
        assert!(
            (iou - iou_3d(&b, &a)).abs() < 1e-12,
            "pair {pair}: asymmetric"
        );

        let ba = bev_bounds(&a);
        let bb = bev_bounds(&b);
        let (za, zb) = (a.z_interval(), b.z_interval());
        let x0 = ba[0].max(bb[0]);
        let x1 = ba[1].min(bb[1]);
        let y0 = ba[2].max(bb[2]);
        let y1 = ba[3].min(bb[3]);
        let z0 = za.0.max(zb.0);
        let z1 = za.1.min(zb.1);
        if x0 >= x1 || y0 >= y1 || z0 >= z1 {
            assert_eq!(iou, 0.0, "pair {pair}: disjoint bounds but nonzero iou");
            continue;
        }

        let ca = BevCheck::new(&a);
        let cb = BevCheck::new(&b);
        const N: usize = 125;
        let dx = (x1 - x0) / N as f64;
        let dy = (y1 - y0) / N as f64;
        let dz = (z1 - z0) / N as f64;
        let mut hits = 0u64;
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    let x = x0 + (i as f64 + rng.next_f64()) * dx;
                    let y = y0 + (j as f64 + rng.next_f64()) * dy;
                    let z = z0 + (k as f64 + rng.next_f64()) * dz;
                    let in_a = ca.contains(x, y) && z >= za.0 && z <= za.1;
                    let in_b = cb.contains(x, y) && z >= zb.0 && z <= zb.1;
                    if in_a && in_b {
                        hits += 1;
                    }
                }
            }
        }
        let region = (x1 - x0) * (y1 - y0) * (z1 - z0);
        let inter = hits as f64 / (N * N * N) as f64 * region;
        let mc = inter / (a.volume() + b.volume() - inter);
        assert!(
            (iou - mc).abs() < 2e-3,
            "pair {pair}: analytic {iou} vs voxel estimate {mc}"
        );
    }
}

#[test]
fn overlap_bounds_hold_over_a_wide_box_population() {
    let mut rng = SampleRng::new(43, "overlap", "bounds");
    for _ in 0..2000 {
        let mut make = || {
            Box3D::ground_truth(
                Vector3::new(
                    rng.uniform(-10.0, 10.0),
                    rng.uniform(-10.0, 10.0),
                    rng.uniform(-2.0, 2.0),
                ),
                [
                    rng.uniform(0.05, 12.0),
                    rng.uniform(0.05, 12.0),
                    rng.uniform(0.05, 6.0),
                ],
                rng.uniform(-10.0, 10.0),
                0,
            )
            .unwrap()
        };
        let a = make();
        let b = make();
        let bev = rotated_iou_bev(&a, &b);
        let vol = iou_3d(&a, &b);
        assert!((0.0..=1.0).contains(&bev));
        assert!((0.0..=1.0).contains(&vol));
        assert_eq!(rotated_iou_bev(&a, &a), 1.0);
        assert_eq!(iou_3d(&b, &b), 1.0);
    }
}
