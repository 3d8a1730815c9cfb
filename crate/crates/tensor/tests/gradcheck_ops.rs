//! Finite-difference verification for every differentiable op.
//!
//! Each case builds a scalar loss from random inputs and compares the tape
//! gradients against central differences (step 1e-5·max(1,|p|), tolerance
//! 1e-4 relative).

use bevbench_rng::SampleRng;
use bevbench_tensor::{check_gradients, BnMode, GradTape, Tensor4, Var};

const TOL: f64 = 1e-4;

fn random_tensor(shape: [usize; 4], lo: f64, hi: f64, rng: &mut SampleRng) -> Tensor4 {
    let n = shape.iter().product();
    Tensor4::from_vec(shape, (0..n).map(|_| rng.uniform(lo, hi)).collect()).unwrap()
}

/// Runs the checker and asserts the tolerance, reporting the worst probe.
fn assert_grads(
    inputs: &[Tensor4],
    build: impl Fn(&mut GradTape, &[Var]) -> Result<Var, bevbench_tensor::TensorError>,
) {
    let report = check_gradients(inputs, build).unwrap();
    assert!(
        report.passes(TOL),
        "max rel err {} at {:?} over {} probes",
        report.max_rel_err,
        report.worst,
        report.probes
    );
}

#[test]
fn conv2d_stride1_padded() {
    let mut rng = SampleRng::new(10, "grad", "conv_s1");
    let x = random_tensor([2, 3, 4, 4], -1.0, 1.0, &mut rng);
    let w = random_tensor([2, 3, 3, 3], -0.5, 0.5, &mut rng);
    let b = random_tensor([1, 2, 1, 1], -0.5, 0.5, &mut rng);
    assert_grads(&[x, w, b], |tape, v| {
        let y = tape.conv2d(v[0], v[1], v[2], 1, 1)?;
        let s = tape.sigmoid(y);
        Ok(tape.sum_all(s))
    });
}

#[test]
fn conv2d_stride2_unpadded() {
    let mut rng = SampleRng::new(10, "grad", "conv_s2");
    let x = random_tensor([1, 2, 5, 5], -1.0, 1.0, &mut rng);
    let w = random_tensor([3, 2, 3, 3], -0.5, 0.5, &mut rng);
    let b = random_tensor([1, 3, 1, 1], -0.5, 0.5, &mut rng);
    assert_grads(&[x, w, b], |tape, v| {
        let y = tape.conv2d(v[0], v[1], v[2], 2, 0)?;
        Ok(tape.sum_all(y))
    });
}

#[test]
fn conv2d_one_by_one() {
    let mut rng = SampleRng::new(10, "grad", "conv_1x1");
    let x = random_tensor([2, 4, 3, 3], -1.0, 1.0, &mut rng);
    let w = random_tensor([2, 4, 1, 1], -0.5, 0.5, &mut rng);
    let b = random_tensor([1, 2, 1, 1], -0.5, 0.5, &mut rng);
    assert_grads(&[x, w, b], |tape, v| {
        let y = tape.conv2d(v[0], v[1], v[2], 1, 0)?;
        let r = tape.relu(y);
        Ok(tape.sum_all(r))
    });
}

#[test]
fn linear_layer() {
    let mut rng = SampleRng::new(11, "grad", "linear");
    let x = random_tensor([3, 5, 1, 1], -1.0, 1.0, &mut rng);
    let w = random_tensor([4, 5, 1, 1], -0.5, 0.5, &mut rng);
    let b = random_tensor([1, 4, 1, 1], -0.5, 0.5, &mut rng);
    assert_grads(&[x, w, b], |tape, v| {
        let y = tape.linear(v[0], v[1], v[2])?;
        let s = tape.sigmoid(y);
        Ok(tape.sum_all(s))
    });
}

#[test]
fn add_and_scale() {
    let mut rng = SampleRng::new(12, "grad", "add");
    let a = random_tensor([1, 2, 3, 3], -1.0, 1.0, &mut rng);
    let b = random_tensor([1, 2, 3, 3], -1.0, 1.0, &mut rng);
    assert_grads(&[a, b], |tape, v| {
        let s = tape.add(v[0], v[1])?;
        let sc = tape.scale(s, -1.7);
        let sg = tape.sigmoid(sc);
        Ok(tape.sum_all(sg))
    });
}

#[test]
fn relu_away_from_the_kink() {
    let mut rng = SampleRng::new(13, "grad", "relu");
    // Keep inputs away from zero so the finite-difference probe does not
    // straddle the kink.
    let vals: Vec<f64> = (0..18)
        .map(|_| {
            let v = rng.uniform(0.1, 1.0);
            if rng.bernoulli(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let x = Tensor4::from_vec([1, 2, 3, 3], vals).unwrap();
    assert_grads(&[x], |tape, v| {
        let y = tape.relu(v[0]);
        Ok(tape.sum_all(y))
    });
}

#[test]
fn sigmoid_activation() {
    let mut rng = SampleRng::new(14, "grad", "sigmoid");
    let x = random_tensor([2, 1, 2, 2], -3.0, 3.0, &mut rng);
    assert_grads(&[x], |tape, v| {
        let y = tape.sigmoid(v[0]);
        Ok(tape.sum_all(y))
    });
}

#[test]
fn concat_channels_routes_gradients() {
    let mut rng = SampleRng::new(15, "grad", "concat");
    let a = random_tensor([2, 2, 3, 3], -1.0, 1.0, &mut rng);
    let b = random_tensor([2, 3, 3, 3], -1.0, 1.0, &mut rng);
    assert_grads(&[a, b], |tape, v| {
        let y = tape.concat_channels(&[v[0], v[1]])?;
        let s = tape.sigmoid(y);
        Ok(tape.sum_all(s))
    });
}

#[test]
fn global_avg_pool_distributes_gradients() {
    let mut rng = SampleRng::new(16, "grad", "gap");
    let x = random_tensor([2, 3, 4, 4], -1.0, 1.0, &mut rng);
    assert_grads(&[x], |tape, v| {
        let y = tape.global_avg_pool(v[0]);
        let s = tape.sigmoid(y);
        Ok(tape.sum_all(s))
    });
}

#[test]
fn resampling_pair() {
    let mut rng = SampleRng::new(17, "grad", "resample");
    let x = random_tensor([1, 2, 4, 4], -1.0, 1.0, &mut rng);
    assert_grads(&[x], |tape, v| {
        let d = tape.down2(v[0])?;
        let u = tape.up2(d);
        let s = tape.sigmoid(u);
        Ok(tape.sum_all(s))
    });
}

#[test]
fn batch_norm_training_mode() {
    let mut rng = SampleRng::new(18, "grad", "bn_train");
    let x = random_tensor([3, 2, 2, 2], -2.0, 2.0, &mut rng);
    let gamma = random_tensor([1, 2, 1, 1], 0.5, 1.5, &mut rng);
    let beta = random_tensor([1, 2, 1, 1], -0.5, 0.5, &mut rng);
    assert_grads(&[x, gamma, beta], |tape, v| {
        let y = tape.batch_norm(v[0], v[1], v[2], 1e-5, BnMode::Train)?;
        let s = tape.sigmoid(y);
        Ok(tape.sum_all(s))
    });
}

#[test]
fn batch_norm_eval_mode() {
    let mut rng = SampleRng::new(19, "grad", "bn_eval");
    let x = random_tensor([2, 2, 2, 2], -2.0, 2.0, &mut rng);
    let gamma = random_tensor([1, 2, 1, 1], 0.5, 1.5, &mut rng);
    let beta = random_tensor([1, 2, 1, 1], -0.5, 0.5, &mut rng);
    assert_grads(&[x, gamma, beta], |tape, v| {
        let mode = BnMode::Eval { mean: vec![0.1, -0.2], var: vec![0.8, 1.3] };
        let y = tape.batch_norm(v[0], v[1], v[2], 1e-5, mode)?;
        let s = tape.sigmoid(y);
        Ok(tape.sum_all(s))
    });
}

#[test]
fn mul_channel_gating() {
    let mut rng = SampleRng::new(20, "grad", "gate");
    let x = random_tensor([2, 3, 2, 2], -1.0, 1.0, &mut rng);
    let g = random_tensor([2, 3, 1, 1], 0.1, 0.9, &mut rng);
    assert_grads(&[x, g], |tape, v| {
        let y = tape.mul_channel(v[0], v[1])?;
        Ok(tape.sum_all(y))
    });
}

#[test]
fn reshape_passes_gradients_through() {
    let mut rng = SampleRng::new(21, "grad", "reshape");
    let x = random_tensor([2, 2, 2, 2], -1.0, 1.0, &mut rng);
    assert_grads(&[x], |tape, v| {
        let flat = tape.reshape(v[0], [2, 8, 1, 1])?;
        let s = tape.sigmoid(flat);
        let back = tape.reshape(s, [2, 2, 2, 2])?;
        Ok(tape.sum_all(back))
    });
}

#[test]
fn focal_binary_cross_entropy() {
    let mut rng = SampleRng::new(22, "grad", "focal");
    let logits = random_tensor([1, 1, 3, 3], -2.5, 2.5, &mut rng);
    let targets = Tensor4::from_vec(
        [1, 1, 3, 3],
        (0..9).map(|_| if rng.bernoulli(0.3) { 1.0 } else { 0.0 }).collect(),
    )
    .unwrap();
    assert_grads(&[logits, targets], |tape, v| {
        tape.focal_bce(v[0], v[1], 0.25, 2.0, 1.0 / 3.0)
    });
}

#[test]
fn smooth_l1_masked() {
    let mut rng = SampleRng::new(23, "grad", "smooth_l1");
    let pred = random_tensor([1, 2, 2, 2], -2.0, 2.0, &mut rng);
    // Keep |pred − target| away from the quadratic/linear boundary at β.
    let target = pred.map(|v| v + 0.4);
    let mask = Tensor4::from_vec(
        [1, 2, 2, 2],
        (0..8).map(|_| if rng.bernoulli(0.6) { 1.0 } else { 0.0 }).collect(),
    )
    .unwrap();
    assert_grads(&[pred, target, mask], |tape, v| {
        tape.smooth_l1(v[0], v[1], v[2], 1.0, 0.5)
    });
}

#[test]
fn smooth_l1_in_the_linear_zone() {
    let mut rng = SampleRng::new(24, "grad", "smooth_l1_lin");
    let pred = random_tensor([1, 1, 2, 2], -0.5, 0.5, &mut rng);
    let target = pred.map(|v| v + 2.5);
    let mask = Tensor4::filled([1, 1, 2, 2], 1.0);
    assert_grads(&[pred, target, mask], |tape, v| {
        tape.smooth_l1(v[0], v[1], v[2], 1.0, 1.0)
    });
}

#[test]
fn composite_graph_mixing_most_ops() {
    let mut rng = SampleRng::new(25, "grad", "composite");
    let a = random_tensor([2, 2, 4, 4], -1.0, 1.0, &mut rng);
    let b = random_tensor([2, 3, 4, 4], -1.0, 1.0, &mut rng);
    let w = random_tensor([4, 5, 3, 3], -0.4, 0.4, &mut rng);
    let wb = random_tensor([1, 4, 1, 1], -0.2, 0.2, &mut rng);
    let gamma = random_tensor([1, 4, 1, 1], 0.8, 1.2, &mut rng);
    let beta = random_tensor([1, 4, 1, 1], -0.1, 0.1, &mut rng);
    let gw = random_tensor([4, 4, 1, 1], -0.4, 0.4, &mut rng);
    let gb = random_tensor([1, 4, 1, 1], -0.2, 0.2, &mut rng);
    assert_grads(&[a, b, w, wb, gamma, beta, gw, gb], |tape, v| {
        let cat = tape.concat_channels(&[v[0], v[1]])?;
        let conv = tape.conv2d(cat, v[2], v[3], 1, 1)?;
        let norm = tape.batch_norm(conv, v[4], v[5], 1e-5, BnMode::Train)?;
        let act = tape.relu(norm);
        let pooled = tape.global_avg_pool(act);
        let gate_in = tape.linear(pooled, v[6], v[7])?;
        let gate = tape.sigmoid(gate_in);
        let gated = tape.mul_channel(act, gate)?;
        let down = tape.down2(gated)?;
        let up = tape.up2(down);
        let merged = tape.add(up, gated)?;
        let squashed = tape.sigmoid(merged);
        Ok(tape.sum_all(squashed))
    });
}
