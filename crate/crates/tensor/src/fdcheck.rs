//! Central finite-difference verification of tape gradients.

use crate::tape::{GradTape, Var};
use crate::tensor::Tensor4;
use crate::TensorError;

/// Outcome of a finite-difference sweep over every element of every input.
#[derive(Debug, Clone)]
pub struct FdReport {
    /// Largest relative error seen, with |a−n| / max(1, |a|, |n|) as the
    /// error measure (absolute for small gradients, relative for large).
    pub max_rel_err: f64,
    /// Number of elements probed.
    pub probes: usize,
    /// (input index, element index, analytic, numeric) of the worst probe.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl FdReport {
    /// True when every probe agreed within `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compares tape gradients of a scalar loss against central finite
/// differences with step h = 1e-5·max(1, |p|) per element.
///
/// `build` must construct the loss from the given leaf handles, in order, and
/// be a pure function of their values: it is re-run twice per probed element.
pub fn check_gradients(
    inputs: &[Tensor4],
    build: impl Fn(&mut GradTape, &[Var]) -> Result<Var, TensorError>,
) -> Result<FdReport, TensorError> {
    let eval = |tensors: &[Tensor4]| -> Result<f64, TensorError> {
        let mut tape = GradTape::new();
        let vars: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let loss = build(&mut tape, &vars)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut tape = GradTape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = build(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut report = FdReport { max_rel_err: 0.0, probes: 0, worst: None };
    let mut work: Vec<Tensor4> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        let analytic_tensor = grads.get(vars[i]);
        for j in 0..input.len() {
            let p = input.data()[j];
            let h = 1e-5 * p.abs().max(1.0);

            work[i].data_mut()[j] = p + h;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = p - h;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = p;

            let numeric = (plus - minus) / (2.0 * h);
            let analytic = analytic_tensor.map_or(0.0, |g| g.data()[j]);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
            report.probes += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((i, j, analytic, numeric));
            }
        }
    }
    Ok(report)
}
