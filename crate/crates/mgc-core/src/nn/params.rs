//! Named parameters with gradient accumulators.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// Resolves float math to libm in no_std builds; std test builds shadow it.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use super::NnError;

/// A learnable tensor plus its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Vec<f64>,
}

/// Ordered set of model parameters. Names must be unique; the order is the
/// registration order and is part of the model fingerprint.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn push(&mut self, name: &str, value: Tensor) -> Result<usize, NnError> {
        if self.params.iter().any(|p| p.name == name) {
            return Err(NnError::DuplicateParam(String::from(name)));
        }
        let grad = vec![0.0; value.numel()];
        self.params.push(Parameter {
            name: String::from(name),
            value,
            grad,
        });
        Ok(self.params.len() - 1)
    }

    /// Kaiming-uniform weight: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
    pub fn push_kaiming(
        &mut self,
        name: &str,
        dims: &[usize],
        fan_in: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize, NnError> {
        let bound = (6.0 / fan_in as f64).sqrt();
        let n: usize = dims.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        self.push(name, Tensor::from_vec(dims, data)?)
    }

    pub fn push_zeros(&mut self, name: &str, dims: &[usize]) -> Result<usize, NnError> {
        self.push(name, Tensor::zeros(dims))
    }

    pub fn push_ones(&mut self, name: &str, dims: &[usize]) -> Result<usize, NnError> {
        let n: usize = dims.iter().product();
        self.push(name, Tensor::from_vec(dims, vec![1.0; n])?)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Parameter {
        &self.params[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Parameter {
        &mut self.params[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Registers parameter `idx` as a tape leaf for this pass.
    pub fn leaf(&self, tape: &mut Tape, idx: usize) -> Result<NodeId, NnError> {
        tape.param_leaf(idx, self.params[idx].value.clone())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Adds the pass gradients from `tape`/`grads` into the accumulators,
    /// in ascending node order.
    pub fn accumulate(&mut self, tape: &Tape, grads: &super::tape::Grads) {
        for (slot, g) in tape.param_grads(grads) {
            let acc = &mut self.params[slot].grad;
            for (a, &v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn duplicate_names_rejected() {
        let mut ps = ParamSet::new();
        ps.push("w", Tensor::zeros(&[2])).unwrap();
        assert!(matches!(
            ps.push("w", Tensor::zeros(&[2])),
            Err(NnError::DuplicateParam(_))
        ));
    }

    #[test]
    fn kaiming_bound_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamSet::new();
        ps.push_kaiming("w", &[16, 9], 9, &mut rng).unwrap();
        let bound = (6.0f64 / 9.0).sqrt();
        assert!(ps.get(0).value.data().iter().all(|v| v.abs() < bound));

        let mut rng2 = ChaCha8Rng::seed_from_u64(5);
        let mut ps2 = ParamSet::new();
        ps2.push_kaiming("w", &[16, 9], 9, &mut rng2).unwrap();
        assert_eq!(ps.get(0).value.data(), ps2.get(0).value.data());
    }
}
