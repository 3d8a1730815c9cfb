//! Numeric kernels behind the tape ops.
//!
//! Plain loops over dense buffers with a fixed reduction order (input-channel
//! major, then kernel row, then kernel column), so every result is bitwise
//! reproducible regardless of how callers schedule work.

use crate::tensor::Tensor4;

/// Output spatial size of a convolution along one axis.
pub(crate) fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Valid output range along one axis for a fixed kernel tap offset, such that
/// the corresponding input coordinate `o * stride + tap_off` lies in
/// `[0, input)`.
#[inline]
fn tap_range(out_len: usize, input: usize, stride: usize, tap_off: isize) -> (usize, usize) {
    let lo = if tap_off >= 0 {
        0
    } else {
        ((-tap_off) as usize).div_ceil(stride)
    };
    let max_in = input as isize - 1 - tap_off;
    if max_in < 0 {
        return (0, 0);
    }
    let hi = (max_in as usize / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

pub(crate) fn conv2d(x: &Tensor4, w: &Tensor4, bias: &Tensor4, stride: usize, pad: usize) -> Tensor4 {
    let [bn, ci, h, wd] = x.shape();
    let [co, _, k, _] = w.shape();
    let ho = conv_out_dim(h, k, stride, pad);
    let wo = conv_out_dim(wd, k, stride, pad);
    let mut out = vec![0.0; bn * co * ho * wo];
    let (xd, wv, bd) = (x.data(), w.data(), bias.data());

    for b in 0..bn {
        for oc in 0..co {
            let out_plane = &mut out[(b * co + oc) * ho * wo..][..ho * wo];
            out_plane.fill(bd[oc]);
            for ic in 0..ci {
                let x_plane = &xd[(b * ci + ic) * h * wd..][..h * wd];
                for ky in 0..k {
                    let y_off = ky as isize - pad as isize;
                    let (oh_lo, oh_hi) = tap_range(ho, h, stride, y_off);
                    for kx in 0..k {
                        let x_off = kx as isize - pad as isize;
                        let (ow_lo, ow_hi) = tap_range(wo, wd, stride, x_off);
                        let tap = wv[((oc * ci + ic) * k + ky) * k + kx];
                        for oh in oh_lo..oh_hi {
                            let ih = (oh * stride) as isize + y_off;
                            let x_row = &x_plane[ih as usize * wd..][..wd];
                            let o_row = &mut out_plane[oh * wo..][..wo];
                            for ow in ow_lo..ow_hi {
                                let iw = (ow * stride) as isize + x_off;
                                o_row[ow] += tap * x_row[iw as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor4::from_vec([bn, co, ho, wo], out).unwrap()
}

/// Gradients of `conv2d` with respect to input, weights, and bias.
pub(crate) fn conv2d_backward(
    x: &Tensor4,
    w: &Tensor4,
    grad_out: &Tensor4,
    stride: usize,
    pad: usize,
) -> (Tensor4, Tensor4, Tensor4) {
    let [bn, ci, h, wd] = x.shape();
    let [co, _, k, _] = w.shape();
    let [_, _, ho, wo] = grad_out.shape();
    let (xd, wv, gd) = (x.data(), w.data(), grad_out.data());

    let mut dx = vec![0.0; xd.len()];
    let mut dw = vec![0.0; wv.len()];
    let mut db = vec![0.0; co];

    for b in 0..bn {
        for oc in 0..co {
            let g_plane = &gd[(b * co + oc) * ho * wo..][..ho * wo];
            for g in g_plane {
                db[oc] += g;
            }
            for ic in 0..ci {
                let x_plane = &xd[(b * ci + ic) * h * wd..][..h * wd];
                let dx_plane = &mut dx[(b * ci + ic) * h * wd..][..h * wd];
                for ky in 0..k {
                    let y_off = ky as isize - pad as isize;
                    let (oh_lo, oh_hi) = tap_range(ho, h, stride, y_off);
                    for kx in 0..k {
                        let x_off = kx as isize - pad as isize;
                        let (ow_lo, ow_hi) = tap_range(wo, wd, stride, x_off);
                        let w_idx = ((oc * ci + ic) * k + ky) * k + kx;
                        let tap = wv[w_idx];
                        let mut acc = 0.0;
                        for oh in oh_lo..oh_hi {
                            let ih = ((oh * stride) as isize + y_off) as usize;
                            let x_row = &x_plane[ih * wd..][..wd];
                            let dx_row = &mut dx_plane[ih * wd..][..wd];
                            let g_row = &g_plane[oh * wo..][..wo];
                            for ow in ow_lo..ow_hi {
                                let iw = ((ow * stride) as isize + x_off) as usize;
                                acc += g_row[ow] * x_row[iw];
                                dx_row[iw] += g_row[ow] * tap;
                            }
                        }
                        dw[w_idx] += acc;
                    }
                }
            }
        }
    }
    (
        Tensor4::from_vec([bn, ci, h, wd], dx).unwrap(),
        Tensor4::from_vec([co, ci, k, k], dw).unwrap(),
        Tensor4::from_vec([1, co, 1, 1], db).unwrap(),
    )
}

pub(crate) fn linear(x: &Tensor4, w: &Tensor4, bias: &Tensor4) -> Tensor4 {
    let [bn, nf, _, _] = x.shape();
    let [no, _, _, _] = w.shape();
    let (xd, wd, bd) = (x.data(), w.data(), bias.data());
    let mut out = vec![0.0; bn * no];
    for b in 0..bn {
        let x_row = &xd[b * nf..][..nf];
        for o in 0..no {
            let w_row = &wd[o * nf..][..nf];
            let mut acc = 0.0;
            for f in 0..nf {
                acc += x_row[f] * w_row[f];
            }
            out[b * no + o] = acc + bd[o];
        }
    }
    Tensor4::from_vec([bn, no, 1, 1], out).unwrap()
}

pub(crate) fn linear_backward(
    x: &Tensor4,
    w: &Tensor4,
    grad_out: &Tensor4,
) -> (Tensor4, Tensor4, Tensor4) {
    let [bn, nf, _, _] = x.shape();
    let [no, _, _, _] = w.shape();
    let (xd, wd, gd) = (x.data(), w.data(), grad_out.data());
    let mut dx = vec![0.0; bn * nf];
    let mut dw = vec![0.0; no * nf];
    let mut db = vec![0.0; no];
    for b in 0..bn {
        let x_row = &xd[b * nf..][..nf];
        let dx_row = &mut dx[b * nf..][..nf];
        for o in 0..no {
            let g = gd[b * no + o];
            db[o] += g;
            let w_row = &wd[o * nf..][..nf];
            let dw_row = &mut dw[o * nf..][..nf];
            for f in 0..nf {
                dw_row[f] += g * x_row[f];
                dx_row[f] += g * w_row[f];
            }
        }
    }
    (
        Tensor4::from_vec([bn, nf, 1, 1], dx).unwrap(),
        Tensor4::from_vec([no, nf, 1, 1], dw).unwrap(),
        Tensor4::from_vec([1, no, 1, 1], db).unwrap(),
    )
}

pub(crate) fn global_avg_pool(x: &Tensor4) -> Tensor4 {
    let [bn, c, h, w] = x.shape();
    let plane = h * w;
    let xd = x.data();
    let mut out = vec![0.0; bn * c];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for v in &xd[i * plane..][..plane] {
            acc += v;
        }
        *o = acc / plane as f64;
    }
    Tensor4::from_vec([bn, c, 1, 1], out).unwrap()
}

pub(crate) fn global_avg_pool_backward(x_shape: [usize; 4], grad_out: &Tensor4) -> Tensor4 {
    let [bn, c, h, w] = x_shape;
    let plane = h * w;
    let gd = grad_out.data();
    let mut dx = vec![0.0; bn * c * plane];
    for i in 0..bn * c {
        let g = gd[i] / plane as f64;
        dx[i * plane..][..plane].fill(g);
    }
    Tensor4::from_vec(x_shape, dx).unwrap()
}

pub(crate) fn down2(x: &Tensor4) -> Tensor4 {
    let [bn, c, h, w] = x.shape();
    let (ho, wo) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = vec![0.0; bn * c * ho * wo];
    for p in 0..bn * c {
        let x_plane = &xd[p * h * w..][..h * w];
        let o_plane = &mut out[p * ho * wo..][..ho * wo];
        for oh in 0..ho {
            for ow in 0..wo {
                let (ih, iw) = (2 * oh, 2 * ow);
                o_plane[oh * wo + ow] = (x_plane[ih * w + iw]
                    + x_plane[ih * w + iw + 1]
                    + x_plane[(ih + 1) * w + iw]
                    + x_plane[(ih + 1) * w + iw + 1])
                    * 0.25;
            }
        }
    }
    Tensor4::from_vec([bn, c, ho, wo], out).unwrap()
}

pub(crate) fn down2_backward(x_shape: [usize; 4], grad_out: &Tensor4) -> Tensor4 {
    let [bn, c, h, w] = x_shape;
    let (ho, wo) = (h / 2, w / 2);
    let gd = grad_out.data();
    let mut dx = vec![0.0; bn * c * h * w];
    for p in 0..bn * c {
        let g_plane = &gd[p * ho * wo..][..ho * wo];
        let dx_plane = &mut dx[p * h * w..][..h * w];
        for oh in 0..ho {
            for ow in 0..wo {
                let g = g_plane[oh * wo + ow] * 0.25;
                let (ih, iw) = (2 * oh, 2 * ow);
                dx_plane[ih * w + iw] += g;
                dx_plane[ih * w + iw + 1] += g;
                dx_plane[(ih + 1) * w + iw] += g;
                dx_plane[(ih + 1) * w + iw + 1] += g;
            }
        }
    }
    Tensor4::from_vec(x_shape, dx).unwrap()
}

pub(crate) fn up2(x: &Tensor4) -> Tensor4 {
    let [bn, c, h, w] = x.shape();
    let (ho, wo) = (2 * h, 2 * w);
    let xd = x.data();
    let mut out = vec![0.0; bn * c * ho * wo];
    for p in 0..bn * c {
        let x_plane = &xd[p * h * w..][..h * w];
        let o_plane = &mut out[p * ho * wo..][..ho * wo];
        for oh in 0..ho {
            for ow in 0..wo {
                o_plane[oh * wo + ow] = x_plane[(oh / 2) * w + ow / 2];
            }
        }
    }
    Tensor4::from_vec([bn, c, ho, wo], out).unwrap()
}

pub(crate) fn up2_backward(x_shape: [usize; 4], grad_out: &Tensor4) -> Tensor4 {
    let [bn, c, h, w] = x_shape;
    let (ho, wo) = (2 * h, 2 * w);
    let gd = grad_out.data();
    let mut dx = vec![0.0; bn * c * h * w];
    for p in 0..bn * c {
        let g_plane = &gd[p * ho * wo..][..ho * wo];
        let dx_plane = &mut dx[p * h * w..][..h * w];
        for oh in 0..ho {
            for ow in 0..wo {
                dx_plane[(oh / 2) * w + ow / 2] += g_plane[oh * wo + ow];
            }
        }
    }
    Tensor4::from_vec(x_shape, dx).unwrap()
}

/// Per-channel mean and biased variance over (B, H, W).
pub(crate) fn batch_stats(x: &Tensor4) -> (Vec<f64>, Vec<f64>) {
    let [bn, c, h, w] = x.shape();
    let plane = h * w;
    let n = (bn * plane) as f64;
    let xd = x.data();
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut acc = 0.0;
        for b in 0..bn {
            for v in &xd[(b * c + ch) * plane..][..plane] {
                acc += v;
            }
        }
        mean[ch] = acc / n;
    }
    for ch in 0..c {
        let m = mean[ch];
        let mut acc = 0.0;
        for b in 0..bn {
            for v in &xd[(b * c + ch) * plane..][..plane] {
                let d = v - m;
                acc += d * d;
            }
        }
        var[ch] = acc / n;
    }
    (mean, var)
}

/// Normalizes with the given per-channel statistics: γ·(x−μ)/√(σ²+ε) + β.
pub(crate) fn batch_norm_apply(
    x: &Tensor4,
    gamma: &Tensor4,
    beta: &Tensor4,
    mean: &[f64],
    var: &[f64],
    eps: f64,
) -> Tensor4 {
    let [bn, c, h, w] = x.shape();
    let plane = h * w;
    let (xd, gd, bd) = (x.data(), gamma.data(), beta.data());
    let mut out = vec![0.0; xd.len()];
    for b in 0..bn {
        for ch in 0..c {
            let scale = gd[ch] / (var[ch] + eps).sqrt();
            let shift = bd[ch] - mean[ch] * scale;
            let src = &xd[(b * c + ch) * plane..][..plane];
            let dst = &mut out[(b * c + ch) * plane..][..plane];
            for (o, v) in dst.iter_mut().zip(src) {
                *o = v * scale + shift;
            }
        }
    }
    Tensor4::from_vec(x.shape(), out).unwrap()
}

/// Backward pass of training-mode batch norm, where mean and variance are
/// functions of the input batch.
pub(crate) fn batch_norm_backward_train(
    x: &Tensor4,
    gamma: &Tensor4,
    mean: &[f64],
    var: &[f64],
    eps: f64,
    grad_out: &Tensor4,
) -> (Tensor4, Tensor4, Tensor4) {
    let [bn, c, h, w] = x.shape();
    let plane = h * w;
    let n = (bn * plane) as f64;
    let (xd, gd, god) = (x.data(), gamma.data(), grad_out.data());
    let mut dx = vec![0.0; xd.len()];
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for ch in 0..c {
        let inv_sd = 1.0 / (var[ch] + eps).sqrt();
        let m = mean[ch];
        let (mut sum_g, mut sum_gx) = (0.0, 0.0);
        for b in 0..bn {
            let base = (b * c + ch) * plane;
            for i in 0..plane {
                let g = god[base + i];
                sum_g += g;
                sum_gx += g * (xd[base + i] - m) * inv_sd;
            }
        }
        dbeta[ch] = sum_g;
        dgamma[ch] = sum_gx;
        let k = gd[ch] * inv_sd;
        for b in 0..bn {
            let base = (b * c + ch) * plane;
            for i in 0..plane {
                let xhat = (xd[base + i] - m) * inv_sd;
                dx[base + i] = k * (god[base + i] - sum_g / n - xhat * sum_gx / n);
            }
        }
    }
    (
        Tensor4::from_vec(x.shape(), dx).unwrap(),
        Tensor4::from_vec([1, c, 1, 1], dgamma).unwrap(),
        Tensor4::from_vec([1, c, 1, 1], dbeta).unwrap(),
    )
}

/// Backward pass of evaluation-mode batch norm, where the statistics are
/// constants.
pub(crate) fn batch_norm_backward_eval(
    x: &Tensor4,
    gamma: &Tensor4,
    mean: &[f64],
    var: &[f64],
    eps: f64,
    grad_out: &Tensor4,
) -> (Tensor4, Tensor4, Tensor4) {
    let [bn, c, h, w] = x.shape();
    let plane = h * w;
    let (xd, gd, god) = (x.data(), gamma.data(), grad_out.data());
    let mut dx = vec![0.0; xd.len()];
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for ch in 0..c {
        let inv_sd = 1.0 / (var[ch] + eps).sqrt();
        let k = gd[ch] * inv_sd;
        for b in 0..bn {
            let base = (b * c + ch) * plane;
            for i in 0..plane {
                let g = god[base + i];
                dbeta[ch] += g;
                dgamma[ch] += g * (xd[base + i] - mean[ch]) * inv_sd;
                dx[base + i] = g * k;
            }
        }
    }
    (
        Tensor4::from_vec(x.shape(), dx).unwrap(),
        Tensor4::from_vec([1, c, 1, 1], dgamma).unwrap(),
        Tensor4::from_vec([1, c, 1, 1], dbeta).unwrap(),
    )
}

/// log(sigmoid(t)), computed without overflow for large |t|.
#[inline]
fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

/// Focal binary cross-entropy summed over all elements and scaled by `norm`.
/// Targets must be exactly 0 or 1.
pub(crate) fn focal_bce(logits: &Tensor4, targets: &Tensor4, alpha: f64, gamma: f64, norm: f64) -> f64 {
    let mut total = 0.0;
    for (&t, &y) in logits.data().iter().zip(targets.data()) {
        let p = 1.0 / (1.0 + (-t).exp());
        total += if y > 0.5 {
            -alpha * (1.0 - p).powf(gamma) * log_sigmoid(t)
        } else {
            -(1.0 - alpha) * p.powf(gamma) * log_sigmoid(-t)
        };
    }
    total * norm
}

/// Gradient of `focal_bce` with respect to the logits.
pub(crate) fn focal_bce_backward(
    logits: &Tensor4,
    targets: &Tensor4,
    alpha: f64,
    gamma: f64,
    norm: f64,
    grad_out: f64,
) -> Tensor4 {
    let scale = norm * grad_out;
    let mut dl = vec![0.0; logits.len()];
    for (i, (&t, &y)) in logits.data().iter().zip(targets.data()).enumerate() {
        let p = 1.0 / (1.0 + (-t).exp());
        let d = if y > 0.5 {
            let q = 1.0 - p;
            alpha * gamma * q.powf(gamma) * p * log_sigmoid(t) - alpha * q.powf(gamma) * q
        } else {
            let lg = log_sigmoid(-t);
            (1.0 - alpha) * (p.powf(gamma + 1.0) - gamma * p.powf(gamma) * (1.0 - p) * lg)
        };
        dl[i] = d * scale;
    }
    Tensor4::from_vec(logits.shape(), dl).unwrap()
}

/// Smooth-L1 (Huber) loss over masked elements, summed and scaled by `norm`.
pub(crate) fn smooth_l1(pred: &Tensor4, target: &Tensor4, mask: &Tensor4, beta: f64, norm: f64) -> f64 {
    let mut total = 0.0;
    for ((&p, &t), &m) in pred.data().iter().zip(target.data()).zip(mask.data()) {
        if m == 0.0 {
            continue;
        }
        let d = (p - t).abs();
        total += m * if d <= beta { 0.5 * d * d / beta } else { d - 0.5 * beta };
    }
    total * norm
}

/// Gradients of `smooth_l1` with respect to predictions, targets, and mask.
pub(crate) fn smooth_l1_backward(
    pred: &Tensor4,
    target: &Tensor4,
    mask: &Tensor4,
    beta: f64,
    norm: f64,
    grad_out: f64,
) -> (Tensor4, Tensor4, Tensor4) {
    let scale = norm * grad_out;
    let mut dp = vec![0.0; pred.len()];
    let mut dt = vec![0.0; pred.len()];
    let mut dm = vec![0.0; pred.len()];
    for (i, ((&p, &t), &m)) in pred.data().iter().zip(target.data()).zip(mask.data()).enumerate() {
        let d = p - t;
        let ad = d.abs();
        dm[i] = scale * if ad <= beta { 0.5 * d * d / beta } else { ad - 0.5 * beta };
        if m == 0.0 {
            continue;
        }
        let slope = m * scale * (d / beta).clamp(-1.0, 1.0);
        dp[i] = slope;
        dt[i] = -slope;
    }
    (
        Tensor4::from_vec(pred.shape(), dp).unwrap(),
        Tensor4::from_vec(pred.shape(), dt).unwrap(),
        Tensor4::from_vec(pred.shape(), dm).unwrap(),
    )
}
