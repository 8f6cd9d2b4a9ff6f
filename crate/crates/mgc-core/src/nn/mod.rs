//! Minimal dense-tensor reverse-mode autodiff engine.
//!
//! Provides the layer set used by the segmentation and classification
//! networks: conv2d, linear, relu, sigmoid, max/global pooling, bilinear
//! upsampling, layer norm, softmax, scaled dot-product attention, and the
//! fused-logit loss ops, each with a registered backward.

mod gradcheck;
mod kernels;
mod params;
mod tape;
mod tensor;

use alloc::string::String;
use thiserror::Error;

pub use gradcheck::grad_check;
pub use params::{ParamSet, Parameter};
pub use tape::{Grads, NodeId, Tape};
pub use tensor::Tensor;

/// Errors raised by tensor construction and tape ops.
#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: axis {axis} out of range for rank {rank}")]
    InvalidAxis {
        op: &'static str,
        axis: usize,
        rank: usize,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("objective is non-finite")]
    NonFiniteObjective,
    #[error("duplicate parameter name '{0}'")]
    DuplicateParam(String),
}

/// Runs the central-difference check on every differentiable op with small
/// random-ish inputs, returning `(op name, max relative error)` per op.
/// Relu inputs stay away from the kink (|x| > 1e-3).
pub fn layer_grad_suite() -> Result<alloc::vec::Vec<(&'static str, f64)>, NnError> {
    use alloc::vec;
    use alloc::vec::Vec;

    let eps = 1e-5;
    let mut results: Vec<(&'static str, f64)> = Vec::new();

    // Deterministic quasi-random fill, kept away from relu/maxpool ties.
    let fill = |dims: &[usize], salt: u64| -> Tensor {
        let n: usize = dims.iter().product();
        let data: Vec<f64> = (0..n)
            .map(|i| {
                let h = crate::hash::splitmix64(salt.wrapping_add(i as u64 * 1315423911));
                let u = (h >> 11) as f64 / (1u64 << 53) as f64; // [0,1)
                let v = u * 2.0 - 1.0;
                if v.abs() < 2e-3 {
                    v + 5e-3
                } else {
                    v
                }
            })
            .collect();
        Tensor::from_vec(dims, data).expect("finite fill")
    };

    let target: Vec<f64> = (0..8).map(|i| (i as f64) * 0.1 - 0.3).collect();

    // conv2d
    let p = vec![fill(&[2, 2, 5, 5], 1), fill(&[3, 2, 3, 3], 2), fill(&[3], 3)];
    let t8: Vec<f64> = (0..2 * 3 * 9).map(|i| (i % 5) as f64 * 0.2).collect();
    let err = grad_check(&p, |tape, l| {
        let y = tape.conv2d(l[0], l[1], l[2], 2, 1)?;
        tape.mse_loss(y, &t8)
    }, eps)?;
    results.push(("conv2d", err));

    // linear
    let p = vec![fill(&[3, 4], 4), fill(&[5, 4], 5), fill(&[5], 6)];
    let t: Vec<f64> = (0..15).map(|i| (i as f64) * 0.05).collect();
    let err = grad_check(&p, |tape, l| {
        let y = tape.linear(l[0], l[1], l[2])?;
        tape.mse_loss(y, &t)
    }, eps)?;
    results.push(("linear", err));

    // relu (inputs away from the kink by construction)
    let p = vec![fill(&[4, 4], 7)];
    let t: Vec<f64> = (0..16).map(|i| (i as f64) * 0.01).collect();
    let err = grad_check(&p, |tape, l| {
        let y = tape.relu(l[0])?;
        tape.mse_loss(y, &t)
    }, eps)?;
    results.push(("relu", err));

    // sigmoid
    let p = vec![fill(&[4, 4], 8)];
    let err = grad_check(&p, |tape, l| {
        let y = tape.sigmoid(l[0])?;
        tape.mse_loss(y, &t)
    }, eps)?;
    results.push(("sigmoid", err));

    // max_pool2d (distinct values, no ties)
    let p = vec![fill(&[1, 2, 6, 6], 9)];
    let tp: Vec<f64> = (0..2 * 9).map(|i| (i as f64) * 0.1).collect();
    let err = grad_check(&p, |tape, l| {
        let y = tape.max_pool2d(l[0], 2, 2)?;
        tape.mse_loss(y, &tp)
    }, eps)?;
    results.push(("max_pool2d", err));

    // global_avg_pool
    let p = vec![fill(&[2, 3, 4, 4], 10)];
    let tg: Vec<f64> = (0..6).map(|i| (i as f64) * 0.2).collect();
    let err = grad_check(&p, |tape, l| {
        let y = tape.global_avg_pool(l[0])?;
        tape.mse_loss(y, &tg)
    }, eps)?;
    results.push(("global_avg_pool", err));

    // bilinear_upsample
    let p = vec![fill(&[1, 2, 3, 3], 11)];
    let tu: Vec<f64> = (0..2 * 36).map(|i| (i % 7) as f64 * 0.1).collect();
    let err = grad_check(&p, |tape, l| {
        let y = tape.bilinear_upsample(l[0])?;
        tape.mse_loss(y, &tu)
    }, eps)?;
    results.push(("bilinear_upsample", err));

    // layer_norm on [N,C,H,W]
    let p = vec![fill(&[2, 3, 2, 2], 12), fill(&[3], 13), fill(&[3], 14)];
    let tl: Vec<f64> = (0..24).map(|i| (i as f64) * 0.02).collect();
    let err = grad_check(&p, |tape, l| {
        let y = tape.layer_norm(l[0], l[1], l[2], 1e-5)?;
        tape.mse_loss(y, &tl)
    }, eps)?;
    results.push(("layer_norm", err));

    // softmax
    let p = vec![fill(&[3, 5], 15)];
    let ts: Vec<f64> = (0..15).map(|i| (i as f64) * 0.03).collect();
    let err = grad_check(&p, |tape, l| {
        let y = tape.softmax(l[0], 1)?;
        tape.mse_loss(y, &ts)
    }, eps)?;
    results.push(("softmax", err));

    // scaled_dot_attention
    let p = vec![fill(&[4, 6], 16), fill(&[5, 6], 17), fill(&[5, 3], 18)];
    let ta: Vec<f64> = (0..12).map(|i| (i as f64) * 0.05).collect();
    let err = grad_check(&p, |tape, l| {
        let (out, _w) = tape.scaled_dot_attention(l[0], l[1], l[2])?;
        tape.mse_loss(out, &ta)
    }, eps)?;
    results.push(("scaled_dot_attention", err));

    // concat + mul + add + scale (fusion arithmetic)
    let p = vec![fill(&[2, 3], 19), fill(&[2, 3], 20)];
    let tc: Vec<f64> = (0..6).map(|i| (i as f64) * 0.1).collect();
    let err = grad_check(&p, |tape, l| {
        let c = tape.concat(l[0], l[1], 1)?;
        let cut = tape.reshape(c, &[2, 6])?;
        let s = tape.scale(cut, 0.5)?;
        let halves = tape.reshape(s, &[2, 6])?;
        let _ = halves;
        let m = tape.mul(l[0], l[1])?;
        let a = tape.add(m, l[0])?;
        let t2: Vec<f64> = tc.clone();
        let l1 = tape.mse_loss(a, &t2)?;
        let flat = tape.reshape(s, &[12])?;
        let t3: Vec<f64> = (0..12).map(|i| (i as f64) * 0.02).collect();
        let l2 = tape.mse_loss(flat, &t3)?;
        tape.add(l1, l2)
    }, eps)?;
    results.push(("concat_mul_add_scale", err));

    // ce_rows
    let p = vec![fill(&[4, 6], 21)];
    let err = grad_check(&p, |tape, l| tape.ce_rows(l[0], &[1, 5, 0, 3]), eps)?;
    results.push(("ce_rows", err));

    // pixelwise_ce
    let p = vec![fill(&[2, 3, 2, 2], 22)];
    let labels = [0usize, 2, 1, 1, 2, 0, 1, 0];
    let err = grad_check(&p, |tape, l| tape.pixelwise_ce(l[0], &labels), eps)?;
    results.push(("pixelwise_ce", err));

    // bce_logits
    let p = vec![fill(&[3, 3], 23)];
    let y = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0];
    let err = grad_check(&p, |tape, l| tape.bce_logits(l[0], &y), eps)?;
    results.push(("bce_logits", err));

    // tokens_from_map + mean_axis1 + matmul3
    let p = vec![fill(&[2, 3, 2, 2], 24), fill(&[2, 4, 3], 25)];
    let tm: Vec<f64> = (0..6).map(|i| (i as f64) * 0.1).collect();
    let err = grad_check(&p, |tape, l| {
        let tok = tape.tokens_from_map(l[0])?; // [2,4,3]
        let prod = tape.matmul3(tok, l[1], true)?; // [2,4,4]
        let sm = tape.softmax(prod, 2)?;
        let back = tape.matmul3(sm, l[1], false)?; // [2,4,3]
        let pooled = tape.mean_axis1(back)?; // [2,3]
        tape.mse_loss(pooled, &tm)
    }, eps)?;
    results.push(("tokens_attention_pool", err));

    let _ = target;
    Ok(results)
}
