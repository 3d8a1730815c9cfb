//! Glue for driving a model from a [`ParamStore`] through one tape.
//!
//! A [`ModelRun`] leafs each parameter onto the tape the first time a layer
//! asks for it and remembers the mapping, so after `backward` the gradients
//! can be routed back into the store by name and batch-norm running
//! statistics can be refreshed from the recorded nodes.

use std::collections::HashMap;

use crate::params::ParamStore;
use crate::tape::{BnMode, GradTape, Gradients, Var};
use crate::tensor::Tensor4;
use crate::TensorError;

pub const BN_EPS: f64 = 1e-5;
/// Weight of the previous value in the running-statistic update
/// `running = BN_MOMENTUM * running + (1 - BN_MOMENTUM) * batch`.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Batch norm normalizes by batch statistics and records them for
    /// running-statistic updates.
    Train,
    /// Batch norm normalizes by the store's frozen running statistics.
    Eval,
}

enum ParamSource<'s> {
    Store(&'s ParamStore),
    /// Pre-leafed variables, used by gradient checks that need every
    /// parameter to be a probeable input.
    Vars(HashMap<String, Var>),
}

/// Everything a finished forward pass leaves behind: which parameters were
/// used under which tape variables, and which train-mode batch-norm nodes
/// were produced.
pub struct RunTrace {
    pub touched_params: Vec<(String, Var)>,
    pub bn_nodes: Vec<(String, Var)>,
}

pub struct ModelRun<'s, 't> {
    pub tape: &'t mut GradTape,
    source: ParamSource<'s>,
    mode: RunMode,
    touched: Vec<(String, Var)>,
    index: HashMap<String, usize>,
    bn_nodes: Vec<(String, Var)>,
}

impl<'s, 't> ModelRun<'s, 't> {
    pub fn new(tape: &'t mut GradTape, store: &'s ParamStore, mode: RunMode) -> Self {
        ModelRun {
            tape,
            source: ParamSource::Store(store),
            mode,
            touched: Vec::new(),
            index: HashMap::new(),
            bn_nodes: Vec::new(),
        }
    }

    /// A run whose parameters are existing tape variables instead of store
    /// values. Only [`RunMode::Train`] is supported: evaluation needs running
    /// statistics, which live in a store.
    pub fn with_vars(
        tape: &'t mut GradTape,
        vars: &[(String, Var)],
        mode: RunMode,
    ) -> Result<Self, TensorError> {
        if mode != RunMode::Train {
            return Err(TensorError::Unsupported {
                op: "ModelRun::with_vars",
                detail: "pre-leafed runs support train mode only".into(),
            });
        }
        Ok(ModelRun {
            tape,
            source: ParamSource::Vars(vars.iter().cloned().collect()),
            mode,
            touched: Vec::new(),
            index: HashMap::new(),
            bn_nodes: Vec::new(),
        })
    }

    pub fn mode(&self) -> RunMode {
        self.mode
    }

    /// The tape variable holding the named parameter, leafing it on first
    /// use. Repeated calls return the same variable.
    pub fn param(&mut self, name: &str) -> Result<Var, TensorError> {
        if let Some(&i) = self.index.get(name) {
            return Ok(self.touched[i].1);
        }
        let var = match &self.source {
            ParamSource::Store(store) => self.tape.leaf(store.value(name)?.clone()),
            ParamSource::Vars(vars) => *vars.get(name).ok_or_else(|| TensorError::UnknownParam {
                name: name.to_string(),
            })?,
        };
        self.index.insert(name.to_string(), self.touched.len());
        self.touched.push((name.to_string(), var));
        Ok(var)
    }

    /// Batch norm over `x` using the parameters registered by
    /// [`insert_bn_params`] under `layer`.
    pub fn batch_norm(&mut self, x: Var, layer: &str) -> Result<Var, TensorError> {
        let gamma = self.param(&format!("{layer}.gamma"))?;
        let beta = self.param(&format!("{layer}.beta"))?;
        match self.mode {
            RunMode::Train => {
                let out = self.tape.batch_norm(x, gamma, beta, BN_EPS, BnMode::Train)?;
                self.bn_nodes.push((layer.to_string(), out));
                Ok(out)
            }
            RunMode::Eval => {
                let ParamSource::Store(store) = &self.source else {
                    unreachable!("with_vars rejects eval mode");
                };
                let mean = store.value(&format!("{layer}.running_mean"))?.data().to_vec();
                let var = store.value(&format!("{layer}.running_var"))?.data().to_vec();
                self.tape.batch_norm(x, gamma, beta, BN_EPS, BnMode::Eval { mean, var })
            }
        }
    }

    /// Consumes the run, releasing the tape borrow.
    pub fn finish(self) -> RunTrace {
        RunTrace {
            touched_params: self.touched,
            bn_nodes: self.bn_nodes,
        }
    }
}

/// Registers the four tensors of one batch-norm layer: trainable gamma
/// (ones) and beta (zeros), frozen running mean (zeros) and variance (ones).
pub fn insert_bn_params(
    store: &mut ParamStore,
    layer: &str,
    channels: usize,
) -> Result<(), TensorError> {
    let shape = [1, channels, 1, 1];
    store.insert(&format!("{layer}.gamma"), Tensor4::filled(shape, 1.0), true)?;
    store.insert(&format!("{layer}.beta"), Tensor4::zeros(shape), true)?;
    store.insert(&format!("{layer}.running_mean"), Tensor4::zeros(shape), false)?;
    store.insert(&format!("{layer}.running_var"), Tensor4::filled(shape, 1.0), false)?;
    Ok(())
}

/// Routes loss gradients back into the store. Parameters the loss never
/// reached and non-trainable parameters are skipped.
pub fn accumulate_param_grads(
    store: &mut ParamStore,
    grads: &Gradients,
    trace: &RunTrace,
) -> Result<(), TensorError> {
    for (name, var) in &trace.touched_params {
        if let Some(grad) = grads.get(*var) {
            if store.get(name)?.trainable {
                store.accumulate_grad(name, grad)?;
            }
        }
    }
    Ok(())
}

/// Folds the batch statistics recorded by a train-mode run into the store's
/// running statistics.
pub fn update_running_stats(
    store: &mut ParamStore,
    tape: &GradTape,
    trace: &RunTrace,
) -> Result<(), TensorError> {
    for (layer, var) in &trace.bn_nodes {
        let (batch_mean, batch_var) = tape
            .batch_norm_stats(*var)
            .expect("bn_nodes only records train-mode batch norm nodes");
        for (suffix, batch) in [("running_mean", batch_mean), ("running_var", batch_var)] {
            let name = format!("{layer}.{suffix}");
            let old = store.value(&name)?;
            let shape = old.shape();
            let data = old
                .data()
                .iter()
                .zip(batch)
                .map(|(o, b)| BN_MOMENTUM * o + (1.0 - BN_MOMENTUM) * b)
                .collect();
            store.set_value(&name, Tensor4::from_vec(shape, data)?)?;
        }
    }
    Ok(())
}
