//! Reverse-mode differentiation over a flat operation tape.
//!
//! Ops append nodes in execution order, which is already a topological order,
//! so one reverse sweep propagates every gradient exactly once. Values are
//! immutable; the tape owns each node's output tensor.

use crate::kernels;
use crate::tensor::Tensor4;
use crate::TensorError;

/// Handle to a value on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Whether batch norm uses statistics of the current batch or frozen running
/// statistics.
#[derive(Debug, Clone)]
pub enum BnMode {
    /// Normalize by the batch's own per-channel statistics.
    Train,
    /// Normalize by the given running mean and variance (one value per
    /// channel). These are constants, not tape values.
    Eval { mean: Vec<f64>, var: Vec<f64> },
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { x: Var, w: Var, b: Var, stride: usize, pad: usize },
    Linear { x: Var, w: Var, b: Var },
    Add { a: Var, b: Var },
    Relu { x: Var },
    Sigmoid { x: Var },
    ConcatChannels { parts: Vec<Var> },
    GlobalAvgPool { x: Var },
    Down2 { x: Var },
    Up2 { x: Var },
    BatchNorm { x: Var, gamma: Var, beta: Var, mean: Vec<f64>, var: Vec<f64>, eps: f64, train: bool },
    MulChannel { x: Var, gate: Var },
    Reshape { x: Var },
    Scale { x: Var, factor: f64 },
    SumAll { x: Var },
    FocalBce { logits: Var, targets: Var, alpha: f64, gamma: f64, norm: f64 },
    SmoothL1 { pred: Var, target: Var, mask: Var, beta: f64, norm: f64 },
}

struct Node {
    op: Op,
    value: Tensor4,
}

/// Gradients produced by one backward sweep, addressed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor4>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor4> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

/// Ordered record of executed differentiable operations.
#[derive(Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an input value and returns its handle.
    pub fn leaf(&mut self, value: Tensor4) -> Var {
        self.push(Op::Leaf, value)
    }

    /// The tensor held by `v`.
    pub fn value(&self, v: Var) -> &Tensor4 {
        &self.nodes[v.0].value
    }

    /// Batch statistics (mean, variance per channel) recorded by a
    /// training-mode batch norm node, for folding into running averages.
    pub fn batch_norm_stats(&self, v: Var) -> Option<(&[f64], &[f64])> {
        match &self.nodes[v.0].op {
            Op::BatchNorm { mean, var, train: true, .. } => Some((mean, var)),
            _ => None,
        }
    }

    fn push(&mut self, op: Op, value: Tensor4) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> [usize; 4] {
        self.nodes[v.0].value.shape()
    }

    /// 2D convolution with bias. Weights are (C_out, C_in, k, k) with odd k;
    /// bias is (1, C_out, 1, 1); stride 1 or 2.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var, TensorError> {
        let [_, ci, h, wd] = self.shape(x);
        let [co, wci, k, kw] = self.shape(w);
        if wci != ci {
            return Err(TensorError::AxisMismatch {
                op: "conv2d",
                axis: "input channels",
                left: ci,
                right: wci,
            });
        }
        if k != kw || k % 2 == 0 {
            return Err(TensorError::Unsupported {
                op: "conv2d",
                detail: format!("kernel must be square with odd size, got {k}x{kw}"),
            });
        }
        if stride != 1 && stride != 2 {
            return Err(TensorError::Unsupported {
                op: "conv2d",
                detail: format!("stride must be 1 or 2, got {stride}"),
            });
        }
        if h + 2 * pad < k || wd + 2 * pad < k {
            return Err(TensorError::Unsupported {
                op: "conv2d",
                detail: format!("kernel {k} exceeds padded input {h}x{wd} (pad {pad})"),
            });
        }
        let [bb, bc, bh, bw] = self.shape(b);
        if (bb, bc, bh, bw) != (1, co, 1, 1) {
            return Err(TensorError::AxisMismatch {
                op: "conv2d",
                axis: "bias channels",
                left: co,
                right: bc,
            });
        }
        let value = kernels::conv2d(self.value(x), self.value(w), self.value(b), stride, pad);
        Ok(self.push(Op::Conv2d { x, w, b, stride, pad }, value))
    }

    /// Dense layer over (B, F, 1, 1) inputs: out = x·Wᵀ + bias, with W given
    /// as (F_out, F_in, 1, 1).
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let [_, nf, xh, xw] = self.shape(x);
        let [no, wf, _, _] = self.shape(w);
        if xh != 1 || xw != 1 {
            return Err(TensorError::Unsupported {
                op: "linear",
                detail: format!("input must be flattened to (B, F, 1, 1), got spatial {xh}x{xw}"),
            });
        }
        if wf != nf {
            return Err(TensorError::AxisMismatch { op: "linear", axis: "input features", left: nf, right: wf });
        }
        if self.shape(b)[1] != no {
            return Err(TensorError::AxisMismatch {
                op: "linear",
                axis: "bias features",
                left: no,
                right: self.shape(b)[1],
            });
        }
        let value = kernels::linear(self.value(x), self.value(w), self.value(b));
        Ok(self.push(Op::Linear { x, w, b }, value))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::ShapeMismatch { op: "add", left: sa, right: sb });
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor4::from_vec(sa, data)?;
        Ok(self.push(Op::Add { a, b }, value))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(Op::Relu { x }, value)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(Op::Sigmoid { x }, value)
    }

    /// Concatenates along the channel axis; all parts must agree on B, H, W.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        assert!(!parts.is_empty(), "concat_channels needs at least one part");
        let [bn, _, h, w] = self.shape(parts[0]);
        let mut c_total = 0;
        for &p in parts {
            let [pb, pc, ph, pw] = self.shape(p);
            if (pb, ph, pw) != (bn, h, w) {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_channels",
                    left: self.shape(parts[0]),
                    right: self.shape(p),
                });
            }
            c_total += pc;
        }
        let plane = h * w;
        let mut data = vec![0.0; bn * c_total * plane];
        for b in 0..bn {
            let mut c_off = 0;
            for &p in parts {
                let pc = self.shape(p)[1];
                let src = &self.value(p).data()[b * pc * plane..][..pc * plane];
                data[(b * c_total + c_off) * plane..][..pc * plane].copy_from_slice(src);
                c_off += pc;
            }
        }
        let value = Tensor4::from_vec([bn, c_total, h, w], data)?;
        Ok(self.push(Op::ConcatChannels { parts: parts.to_vec() }, value))
    }

    /// Mean over the spatial extent, yielding (B, C, 1, 1).
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let value = kernels::global_avg_pool(self.value(x));
        self.push(Op::GlobalAvgPool { x }, value)
    }

    /// 2×2 average pooling; both spatial dimensions must be even.
    pub fn down2(&mut self, x: Var) -> Result<Var, TensorError> {
        let [_, _, h, w] = self.shape(x);
        if h % 2 != 0 || w % 2 != 0 {
            return Err(TensorError::Unsupported {
                op: "down2",
                detail: format!("spatial dims must be even (pad first), got {h}x{w}"),
            });
        }
        let value = kernels::down2(self.value(x));
        Ok(self.push(Op::Down2 { x }, value))
    }

    /// Nearest-neighbor 2× upsampling.
    pub fn up2(&mut self, x: Var) -> Var {
        let value = kernels::up2(self.value(x));
        self.push(Op::Up2 { x }, value)
    }

    /// Per-channel batch normalization. Gamma and beta are (1, C, 1, 1). In
    /// `Train` mode the batch statistics are recorded on the node and
    /// retrievable via [`GradTape::batch_norm_stats`].
    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64, mode: BnMode) -> Result<Var, TensorError> {
        let c = self.shape(x)[1];
        if self.shape(gamma) != [1, c, 1, 1] || self.shape(beta) != [1, c, 1, 1] {
            return Err(TensorError::AxisMismatch {
                op: "batch_norm",
                axis: "channels",
                left: c,
                right: self.shape(gamma)[1],
            });
        }
        let (mean, var, train) = match mode {
            BnMode::Train => {
                let (m, v) = kernels::batch_stats(self.value(x));
                (m, v, true)
            }
            BnMode::Eval { mean, var } => {
                if mean.len() != c || var.len() != c {
                    return Err(TensorError::AxisMismatch {
                        op: "batch_norm",
                        axis: "running statistics",
                        left: c,
                        right: mean.len(),
                    });
                }
                (mean, var, false)
            }
        };
        let value = kernels::batch_norm_apply(self.value(x), self.value(gamma), self.value(beta), &mean, &var, eps);
        Ok(self.push(Op::BatchNorm { x, gamma, beta, mean, var, eps, train }, value))
    }

    /// Multiplies each channel of `x` by a per-channel gate of shape
    /// (B, C, 1, 1), broadcast over the spatial extent.
    pub fn mul_channel(&mut self, x: Var, gate: Var) -> Result<Var, TensorError> {
        let [bn, c, h, w] = self.shape(x);
        if self.shape(gate) != [bn, c, 1, 1] {
            return Err(TensorError::ShapeMismatch {
                op: "mul_channel",
                left: [bn, c, 1, 1],
                right: self.shape(gate),
            });
        }
        let plane = h * w;
        let gd = self.value(gate).data();
        let mut data = self.value(x).data().to_vec();
        for (i, chunk) in data.chunks_mut(plane).enumerate() {
            let g = gd[i];
            for v in chunk {
                *v *= g;
            }
        }
        let value = Tensor4::from_vec([bn, c, h, w], data)?;
        Ok(self.push(Op::MulChannel { x, gate }, value))
    }

    /// Reinterprets `x` under a new shape with the same element count.
    pub fn reshape(&mut self, x: Var, shape: [usize; 4]) -> Result<Var, TensorError> {
        let value = self.value(x).reshaped(shape)?;
        Ok(self.push(Op::Reshape { x }, value))
    }

    /// Multiplies every element by a constant.
    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).map(|v| v * factor);
        self.push(Op::Scale { x, factor }, value)
    }

    /// Sum of all elements as a (1, 1, 1, 1) scalar.
    pub fn sum_all(&mut self, x: Var) -> Var {
        let mut acc = 0.0;
        for v in self.value(x).data() {
            acc += v;
        }
        let value = Tensor4::from_vec([1, 1, 1, 1], vec![acc]).unwrap();
        self.push(Op::SumAll { x }, value)
    }

    /// Focal binary cross-entropy between logits and 0/1 targets, summed and
    /// scaled by `norm` (callers pass 1/max(1, positives)).
    pub fn focal_bce(&mut self, logits: Var, targets: Var, alpha: f64, gamma: f64, norm: f64) -> Result<Var, TensorError> {
        let (sl, st) = (self.shape(logits), self.shape(targets));
        if sl != st {
            return Err(TensorError::ShapeMismatch { op: "focal_bce", left: sl, right: st });
        }
        let loss = kernels::focal_bce(self.value(logits), self.value(targets), alpha, gamma, norm);
        let value = Tensor4::from_vec([1, 1, 1, 1], vec![loss]).unwrap();
        Ok(self.push(Op::FocalBce { logits, targets, alpha, gamma, norm }, value))
    }

    /// Masked smooth-L1 loss, summed and scaled by `norm`.
    pub fn smooth_l1(&mut self, pred: Var, target: Var, mask: Var, beta: f64, norm: f64) -> Result<Var, TensorError> {
        let (sp, st, sm) = (self.shape(pred), self.shape(target), self.shape(mask));
        if sp != st || sp != sm {
            return Err(TensorError::ShapeMismatch { op: "smooth_l1", left: sp, right: st });
        }
        let loss = kernels::smooth_l1(self.value(pred), self.value(target), self.value(mask), beta, norm);
        let value = Tensor4::from_vec([1, 1, 1, 1], vec![loss]).unwrap();
        Ok(self.push(Op::SmoothL1 { pred, target, mask, beta, norm }, value))
    }

    /// Propagates gradients from a scalar loss back to every reachable value.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        if loss.0 >= self.nodes.len() {
            return Err(TensorError::DetachedValue);
        }
        if self.nodes[loss.0].value.shape() != [1, 1, 1, 1] {
            return Err(TensorError::NonScalarLoss {
                shape: self.nodes[loss.0].value.shape(),
            });
        }
        let mut grads: Vec<Option<Tensor4>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor4::filled([1, 1, 1, 1], 1.0));

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.accumulate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Adds this node's contribution to its parents' gradients.
    fn accumulate(&self, i: usize, g: &Tensor4, grads: &mut [Option<Tensor4>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, stride, pad } => {
                let (dx, dw, db) = kernels::conv2d_backward(self.value(*x), self.value(*w), g, *stride, *pad);
                add_grad(grads, *x, dx);
                add_grad(grads, *w, dw);
                add_grad(grads, *b, db);
            }
            Op::Linear { x, w, b } => {
                let (dx, dw, db) = kernels::linear_backward(self.value(*x), self.value(*w), g);
                add_grad(grads, *x, dx);
                add_grad(grads, *w, dw);
                add_grad(grads, *b, db);
            }
            Op::Add { a, b } => {
                add_grad(grads, *a, g.clone());
                add_grad(grads, *b, g.clone());
            }
            Op::Relu { x } => {
                let xd = self.value(*x).data();
                let data = g.data().iter().zip(xd).map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 }).collect();
                add_grad(grads, *x, Tensor4::from_vec(g.shape(), data).unwrap());
            }
            Op::Sigmoid { x } => {
                let yd = node.value.data();
                let data = g.data().iter().zip(yd).map(|(gv, yv)| gv * yv * (1.0 - yv)).collect();
                add_grad(grads, *x, Tensor4::from_vec(g.shape(), data).unwrap());
            }
            Op::ConcatChannels { parts } => {
                let [bn, c_total, h, w] = node.value.shape();
                let plane = h * w;
                let gd = g.data();
                let mut c_off = 0;
                for &p in parts {
                    let pc = self.shape(p)[1];
                    let mut dp = vec![0.0; bn * pc * plane];
                    for b in 0..bn {
                        dp[b * pc * plane..][..pc * plane]
                            .copy_from_slice(&gd[(b * c_total + c_off) * plane..][..pc * plane]);
                    }
                    add_grad(grads, p, Tensor4::from_vec([bn, pc, h, w], dp).unwrap());
                    c_off += pc;
                }
            }
            Op::GlobalAvgPool { x } => {
                add_grad(grads, *x, kernels::global_avg_pool_backward(self.shape(*x), g));
            }
            Op::Down2 { x } => add_grad(grads, *x, kernels::down2_backward(self.shape(*x), g)),
            Op::Up2 { x } => add_grad(grads, *x, kernels::up2_backward(self.shape(*x), g)),
            Op::BatchNorm { x, gamma, beta, mean, var, eps, train } => {
                let (dx, dgamma, dbeta) = if *train {
                    kernels::batch_norm_backward_train(self.value(*x), self.value(*gamma), mean, var, *eps, g)
                } else {
                    kernels::batch_norm_backward_eval(self.value(*x), self.value(*gamma), mean, var, *eps, g)
                };
                add_grad(grads, *x, dx);
                add_grad(grads, *gamma, dgamma);
                add_grad(grads, *beta, dbeta);
            }
            Op::MulChannel { x, gate } => {
                let [bn, c, h, w] = self.shape(*x);
                let plane = h * w;
                let (xd, gated) = (self.value(*x).data(), self.value(*gate).data());
                let gd = g.data();
                let mut dx = vec![0.0; xd.len()];
                let mut dgate = vec![0.0; bn * c];
                for i in 0..bn * c {
                    let mut acc = 0.0;
                    for j in 0..plane {
                        let idx = i * plane + j;
                        dx[idx] = gd[idx] * gated[i];
                        acc += gd[idx] * xd[idx];
                    }
                    dgate[i] = acc;
                }
                add_grad(grads, *x, Tensor4::from_vec([bn, c, h, w], dx).unwrap());
                add_grad(grads, *gate, Tensor4::from_vec([bn, c, 1, 1], dgate).unwrap());
            }
            Op::Reshape { x } => {
                add_grad(grads, *x, g.reshaped(self.shape(*x)).unwrap());
            }
            Op::Scale { x, factor } => {
                add_grad(grads, *x, g.map(|v| v * factor));
            }
            Op::SumAll { x } => {
                let gv = g.data()[0];
                add_grad(grads, *x, Tensor4::filled(self.shape(*x), gv));
            }
            Op::FocalBce { logits, targets, alpha, gamma, norm } => {
                let dl = kernels::focal_bce_backward(
                    self.value(*logits),
                    self.value(*targets),
                    *alpha,
                    *gamma,
                    *norm,
                    g.data()[0],
                );
                add_grad(grads, *logits, dl);
            }
            Op::SmoothL1 { pred, target, mask, beta, norm } => {
                let (dp, dt, dm) = kernels::smooth_l1_backward(
                    self.value(*pred),
                    self.value(*target),
                    self.value(*mask),
                    *beta,
                    *norm,
                    g.data()[0],
                );
                add_grad(grads, *pred, dp);
                add_grad(grads, *target, dt);
                add_grad(grads, *mask, dm);
            }
        }
    }
}

fn add_grad(grads: &mut [Option<Tensor4>], v: Var, delta: Tensor4) {
    match &mut grads[v.0] {
        Some(existing) => {
            let dd = delta.data();
            for (e, d) in existing.data_mut().iter_mut().zip(dd) {
                *e += d;
            }
        }
        slot => *slot = Some(delta),
    }
}
