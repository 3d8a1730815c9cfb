//! Named parameter storage with gradient accumulators and Adam state.

use std::collections::BTreeMap;

use bevbench_rng::SampleRng;

use crate::tensor::Tensor4;
use crate::TensorError;

/// One named tensor with its gradient accumulator and optimizer moments.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor4,
    pub grad: Tensor4,
    /// First-moment estimate.
    m: Tensor4,
    /// Second-moment estimate.
    v: Tensor4,
    /// Non-trainable parameters (running statistics) are skipped by the
    /// optimizer and exempt from gradient bookkeeping.
    pub trainable: bool,
    /// Set when a gradient has been accumulated since the last zeroing.
    touched: bool,
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// All learnable state of a model, keyed by unique names. Iteration order is
/// lexicographic, which keeps every parameter sweep deterministic.
#[derive(Debug, Default, Clone)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    /// Shared Adam step count, incremented once per `adam_step`.
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Names must be unique within the store.
    pub fn insert(&mut self, name: &str, value: Tensor4, trainable: bool) -> Result<(), TensorError> {
        if self.params.contains_key(name) {
            return Err(TensorError::DuplicateParam { name: name.to_string() });
        }
        let shape = value.shape();
        self.params.insert(
            name.to_string(),
            Param {
                value,
                grad: Tensor4::zeros(shape),
                m: Tensor4::zeros(shape),
                v: Tensor4::zeros(shape),
                trainable,
                touched: false,
            },
        );
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Param, TensorError> {
        self.params.get(name).ok_or_else(|| TensorError::UnknownParam { name: name.to_string() })
    }

    /// The parameter's current value.
    pub fn value(&self, name: &str) -> Result<&Tensor4, TensorError> {
        Ok(&self.get(name)?.value)
    }

    /// Overwrites a parameter's value in place (used for running statistics
    /// and checkpoint restoration). The shape must not change.
    pub fn set_value(&mut self, name: &str, value: Tensor4) -> Result<(), TensorError> {
        let param = self
            .params
            .get_mut(name)
            .ok_or_else(|| TensorError::UnknownParam { name: name.to_string() })?;
        if param.value.shape() != value.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "set_value",
                left: param.value.shape(),
                right: value.shape(),
            });
        }
        param.value = value;
        Ok(())
    }

    /// Adds `delta` into the parameter's gradient accumulator.
    pub fn accumulate_grad(&mut self, name: &str, delta: &Tensor4) -> Result<(), TensorError> {
        let param = self
            .params
            .get_mut(name)
            .ok_or_else(|| TensorError::UnknownParam { name: name.to_string() })?;
        if param.grad.shape() != delta.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "accumulate_grad",
                left: param.grad.shape(),
                right: delta.shape(),
            });
        }
        for (g, d) in param.grad.data_mut().iter_mut().zip(delta.data()) {
            *g += d;
        }
        param.touched = true;
        Ok(())
    }

    /// Clears every gradient accumulator.
    pub fn zero_grads(&mut self) {
        for param in self.params.values_mut() {
            param.grad.data_mut().fill(0.0);
            param.touched = false;
        }
    }

    /// One Adam update over all trainable parameters, with bias correction.
    /// Every trainable parameter must have received a gradient since the last
    /// `zero_grads`, otherwise the step refuses to run.
    pub fn adam_step(&mut self, cfg: AdamConfig) -> Result<(), TensorError> {
        for (name, param) in &self.params {
            if param.trainable && !param.touched {
                return Err(TensorError::MissingGradient { name: name.clone() });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);
        for param in self.params.values_mut() {
            if !param.trainable {
                continue;
            }
            let g = param.grad.data();
            let m = param.m.data_mut();
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            }
            let v = param.v.data_mut();
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            }
            let (m, v) = (param.m.data(), param.v.data());
            let val = param.value.data_mut();
            for i in 0..val.len() {
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                val[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }

    /// Number of optimizer steps taken.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Parameter names in iteration (lexicographic) order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    /// Name/parameter pairs in iteration order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(n, p)| (n.as_str(), p))
    }

    /// Total element count over trainable parameters.
    pub fn trainable_param_count(&self) -> usize {
        self.params.values().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// A tensor with elements drawn uniformly from ±√(1/fan_in), the init used
/// for every convolution and dense layer in the workspace.
pub fn fan_in_uniform(rng: &mut SampleRng, shape: [usize; 4], fan_in: usize) -> Tensor4 {
    let bound = (1.0 / fan_in as f64).sqrt();
    let data = (0..crate::numel(shape)).map(|_| rng.uniform(-bound, bound)).collect();
    Tensor4::from_vec(shape, data).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_single_step_matches_hand_evaluation() {
        let mut store = ParamStore::new();
        store.insert("p", Tensor4::filled([1, 1, 1, 1], 1.0), true).unwrap();
        store.accumulate_grad("p", &Tensor4::filled([1, 1, 1, 1], 1.0)).unwrap();
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        store.adam_step(cfg).unwrap();
        // m̂ = v̂ = 1 after bias correction, so p = 1 − 0.1·1/(1 + 1e-8).
        let p = store.value("p").unwrap().data()[0];
        assert!((p - 0.9).abs() < 1e-8, "p = {p}");
    }

    #[test]
    fn zero_gradient_leaves_parameter_unchanged() {
        let mut store = ParamStore::new();
        store.insert("p", Tensor4::filled([1, 1, 1, 1], 2.5), true).unwrap();
        store.accumulate_grad("p", &Tensor4::zeros([1, 1, 1, 1])).unwrap();
        store.adam_step(AdamConfig::default()).unwrap();
        assert_eq!(store.value("p").unwrap().data()[0], 2.5);
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut store = ParamStore::new();
            store.insert("p", Tensor4::filled([1, 2, 1, 1], 1.0), true).unwrap();
            for step in 1..=5 {
                store.zero_grads();
                store
                    .accumulate_grad("p", &Tensor4::filled([1, 2, 1, 1], 0.3 * step as f64))
                    .unwrap();
                store.adam_step(AdamConfig::default()).unwrap();
            }
            store.value("p").unwrap().data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn missing_gradient_is_an_error_naming_the_parameter() {
        let mut store = ParamStore::new();
        store.insert("conv/w", Tensor4::zeros([1, 1, 1, 1]), true).unwrap();
        match store.adam_step(AdamConfig::default()) {
            Err(TensorError::MissingGradient { name }) => assert_eq!(name, "conv/w"),
            other => panic!("expected MissingGradient, got {other:?}"),
        }
    }

    #[test]
    fn non_trainable_parameters_are_ignored_by_the_optimizer() {
        let mut store = ParamStore::new();
        store.insert("bn/running_mean", Tensor4::filled([1, 1, 1, 1], 0.7), false).unwrap();
        store.adam_step(AdamConfig::default()).unwrap();
        assert_eq!(store.value("bn/running_mean").unwrap().data()[0], 0.7);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor4::zeros([1, 1, 1, 1]), true).unwrap();
        assert!(matches!(
            store.insert("w", Tensor4::zeros([1, 1, 1, 1]), true),
            Err(TensorError::DuplicateParam { .. })
        ));
    }

    #[test]
    fn fan_in_uniform_respects_the_bound() {
        let mut rng = SampleRng::new(1, "init", "test");
        let t = fan_in_uniform(&mut rng, [4, 4, 3, 3], 4 * 9);
        let bound = (1.0 / 36.0f64).sqrt();
        assert!(t.data().iter().all(|v| v.abs() <= bound));
        // Same key reproduces the same init.
        let mut rng2 = SampleRng::new(1, "init", "test");
        assert_eq!(t, fan_in_uniform(&mut rng2, [4, 4, 3, 3], 36));
    }
}
