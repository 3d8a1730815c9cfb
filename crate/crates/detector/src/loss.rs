use bevbench_tensor::{GradTape, Var};

use crate::targets::Targets;
use crate::DetectorError;

pub(crate) const FOCAL_ALPHA: f64 = 0.25;
pub(crate) const FOCAL_GAMMA: f64 = 2.0;
pub(crate) const HUBER_BETA: f64 = 1.0;

/// Detection loss for one batch: focal binary cross-entropy on the
/// objectness logits plus smooth-L1 on the regression channels of positive
/// cells, both summed and divided by the number of positives (at least 1).
///
/// The per-frame targets are stacked along the batch axis here, so callers
/// pass them in the same order as the frames inside `obj` and `reg`.
pub fn detection_loss(
    tape: &mut GradTape,
    obj: Var,
    reg: Var,
    targets: &[Targets],
) -> Result<Var, DetectorError> {
    let [batch, _, _, _] = tape.value(obj).shape();
    if targets.len() != batch {
        return Err(DetectorError::Input(format!(
            "{} target frames for a batch of {batch}",
            targets.len()
        )));
    }
    let positives: usize = targets.iter().map(|t| t.positive_count).sum();
    let norm = 1.0 / positives.max(1) as f64;

    let obj_target = crate::stack_batch(
        &targets.iter().map(|t| t.objectness.clone()).collect::<Vec<_>>(),
    )?;
    let reg_target = crate::stack_batch(
        &targets.iter().map(|t| t.regression.clone()).collect::<Vec<_>>(),
    )?;
    let reg_mask = crate::stack_batch(
        &targets.iter().map(|t| t.mask.clone()).collect::<Vec<_>>(),
    )?;

    let obj_target = tape.leaf(obj_target);
    let reg_target = tape.leaf(reg_target);
    let reg_mask = tape.leaf(reg_mask);

    let focal = tape.focal_bce(obj, obj_target, FOCAL_ALPHA, FOCAL_GAMMA, norm)?;
    let huber = tape.smooth_l1(reg, reg_target, reg_mask, HUBER_BETA, norm)?;
    Ok(tape.add(focal, huber)?)
}
