//! Central-difference gradient verification.

use alloc::vec::Vec;

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use super::NnError;

/// Compares reverse-mode gradients of a scalar objective against central
/// differences `(f(x+eps) - f(x-eps)) / 2eps`, coordinate by coordinate.
///
/// `build` must construct the objective deterministically from the given
/// parameter leaves. Returns the maximum over all coordinates of
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(params: &[Tensor], build: F, eps: f64) -> Result<f64, NnError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, NnError>,
{
    let eval = |tensors: &[Tensor]| -> Result<f64, NnError> {
        let mut tape = Tape::new();
        let leaves: Vec<NodeId> = tensors
            .iter()
            .enumerate()
            .map(|(i, t)| tape.param_leaf(i, t.clone()))
            .collect::<Result<_, _>>()?;
        let loss = build(&mut tape, &leaves)?;
        let v = tape.value(loss).item();
        if !v.is_finite() {
            return Err(NnError::NonFiniteObjective);
        }
        Ok(v)
    };

    // Analytic gradients from one reverse pass.
    let mut tape = Tape::new();
    let leaves: Vec<NodeId> = params
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param_leaf(i, t.clone()))
        .collect::<Result<_, _>>()?;
    let loss = build(&mut tape, &leaves)?;
    if !tape.value(loss).item().is_finite() {
        return Err(NnError::NonFiniteObjective);
    }
    let grads = tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .zip(params.iter())
        .map(|(&id, t)| grads.get(id, t.numel()))
        .collect();

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, base) in params.iter().enumerate() {
        for ci in 0..base.numel() {
            let orig = base.data()[ci];
            work[pi].data_mut()[ci] = orig + eps;
            let f_plus = eval(&work)?;
            work[pi].data_mut()[ci] = orig - eps;
            let f_minus = eval(&work)?;
            work[pi].data_mut()[ci] = orig;
            let numeric = (f_plus - f_minus) / (2.0 * eps);
            let a = analytic[pi][ci];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}
