//! Reverse-mode autodiff over an append-only operation tape.
//!
//! Nodes are appended during the forward pass; `backward` walks them in
//! reverse creation order (a topological order by construction). Every op
//! accumulates reductions with the index ascending, so forward and backward
//! passes are bitwise deterministic. Any op whose output contains a NaN or
//! infinity fails with an error naming the op.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// Resolves float math to libm in no_std builds; std test builds shadow it.
#[allow(unused_imports)]
use num_traits::Float;

use super::kernels::{
    bilinear_coord, col2im_acc, conv_out_len, im2col, matmul_acc, transpose,
};
use super::tensor::Tensor;
use super::NnError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf {
        param: Option<usize>,
    },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    MatMul3 {
        a: NodeId,
        b: NodeId,
        transpose_b: bool,
    },
    Conv2d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    },
    Relu(NodeId),
    Sigmoid(NodeId),
    MaxPool2d {
        x: NodeId,
        argmax: Vec<usize>,
    },
    GlobalAvgPool(NodeId),
    Upsample2d {
        x: NodeId,
    },
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        stats: Vec<(f64, f64)>,
    },
    Softmax {
        x: NodeId,
        axis: usize,
    },
    Concat {
        a: NodeId,
        b: NodeId,
        axis: usize,
    },
    Reshape(NodeId),
    TokensFromMap(NodeId),
    MeanAxis1(NodeId),
    CeRows {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    PixelwiseCe {
        logits: NodeId,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    BceLogits {
        logits: NodeId,
        targets: Vec<f64>,
    },
    MseLoss {
        pred: NodeId,
        target: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
pub struct Grads {
    by_node: Vec<Option<Vec<f64>>>,
}

impl Grads {
    /// Gradient buffer for a node; zeros if the node was never reached.
    pub fn get(&self, id: NodeId, numel: usize) -> Vec<f64> {
        match &self.by_node[id.index()] {
            Some(g) => g.clone(),
            None => vec![0.0; numel],
        }
    }

    fn slot(&mut self, id: NodeId, numel: usize) -> &mut Vec<f64> {
        self.by_node[id.index()].get_or_insert_with(|| vec![0.0; numel])
    }
}

/// The autodiff graph for one forward/backward pass.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.index()].value
    }

    fn dims(&self, id: NodeId) -> &[usize] {
        self.nodes[id.index()].value.dims()
    }

    fn data(&self, id: NodeId) -> &[f64] {
        self.nodes[id.index()].value.data()
    }

    fn needs_grad(&self, id: NodeId) -> bool {
        self.nodes[id.index()].needs_grad
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, needs_grad: bool) -> Result<NodeId, NnError> {
        if !value.data().iter().all(|v| v.is_finite()) {
            return Err(NnError::NonFinite { op: op_name });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(id)
    }

    /// Constant input (no gradient flows into it).
    pub fn input(&mut self, value: Tensor) -> Result<NodeId, NnError> {
        self.push("input", value, Op::Leaf { param: None }, false)
    }

    /// Leaf bound to an external parameter slot; gradients are collected per slot.
    pub fn param_leaf(&mut self, slot: usize, mut value: Tensor) -> Result<NodeId, NnError> {
        value.set_requires_grad(true);
        self.push("param", value, Op::Leaf { param: Some(slot) }, true)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_dims("add", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b).iter())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::from_vec_unchecked(self.dims(a), data);
        let ng = self.needs_grad(a) || self.needs_grad(b);
        self.push("add", value, Op::Add(a, b), ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_dims("mul", a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b).iter())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::from_vec_unchecked(self.dims(a), data);
        let ng = self.needs_grad(a) || self.needs_grad(b);
        self.push("mul", value, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId, NnError> {
        let data = self.data(a).iter().map(|x| x * c).collect();
        let value = Tensor::from_vec_unchecked(self.dims(a), data);
        let ng = self.needs_grad(a);
        self.push("scale", value, Op::Scale(a, c), ng)
    }

    /// `y = x · wᵀ + b` for `x: [N, I]`, `w: [O, I]`, `b: [O]`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (xd, wd, bd) = (self.dims(x), self.dims(w), self.dims(b));
        if xd.len() != 2 || wd.len() != 2 || bd.len() != 1 || xd[1] != wd[1] || wd[0] != bd[0] {
            return Err(NnError::ShapeMismatch {
                op: "linear",
                detail: format!("x {:?}, w {:?}, b {:?}", xd, wd, bd),
            });
        }
        let (n, i, o) = (xd[0], xd[1], wd[0]);
        let mut out = vec![0.0; n * o];
        {
            let xv = self.data(x);
            let wv = self.data(w);
            let bv = self.data(b);
            for r in 0..n {
                let x_row = &xv[r * i..(r + 1) * i];
                let out_row = &mut out[r * o..(r + 1) * o];
                for (c, ov) in out_row.iter_mut().enumerate() {
                    let w_row = &wv[c * i..(c + 1) * i];
                    let mut acc = bv[c];
                    for k in 0..i {
                        acc += x_row[k] * w_row[k];
                    }
                    *ov = acc;
                }
            }
        }
        let value = Tensor::from_vec_unchecked(&[n, o], out);
        let ng = self.needs_grad(x) || self.needs_grad(w) || self.needs_grad(b);
        self.push("linear", value, Op::Linear { x, w, b }, ng)
    }

    /// Batched matrix product `[N,P,Q] × [N,Q,R] -> [N,P,R]`
    /// (`[N,R,Q]` for the second factor when `transpose_b`).
    pub fn matmul3(&mut self, a: NodeId, b: NodeId, transpose_b: bool) -> Result<NodeId, NnError> {
        let (ad, bd) = (self.dims(a).to_vec(), self.dims(b).to_vec());
        if ad.len() != 3 || bd.len() != 3 || ad[0] != bd[0] {
            return Err(NnError::ShapeMismatch {
                op: "matmul3",
                detail: format!("a {:?}, b {:?}", ad, bd),
            });
        }
        let (n, p, q) = (ad[0], ad[1], ad[2]);
        let r = if transpose_b { bd[1] } else { bd[2] };
        let q_b = if transpose_b { bd[2] } else { bd[1] };
        if q != q_b {
            return Err(NnError::ShapeMismatch {
                op: "matmul3",
                detail: format!("inner dims differ: a {:?}, b {:?}", ad, bd),
            });
        }
        let mut out = vec![0.0; n * p * r];
        let b_elems = bd[1] * bd[2];
        {
            let av = self.data(a);
            let bv = self.data(b);
            for s in 0..n {
                let a_s = &av[s * p * q..(s + 1) * p * q];
                let b_s = &bv[s * b_elems..(s + 1) * b_elems];
                let out_s = &mut out[s * p * r..(s + 1) * p * r];
                if transpose_b {
                    // effective B = b_sᵀ with b_s stored [R, Q]
                    let bt = transpose(b_s, r, q); // -> [Q, R]
                    matmul_acc(a_s, p, q, &bt, r, out_s);
                } else {
                    matmul_acc(a_s, p, q, b_s, r, out_s);
                }
            }
        }
        let value = Tensor::from_vec_unchecked(&[n, p, r], out);
        let ng = self.needs_grad(a) || self.needs_grad(b);
        self.push("matmul3", value, Op::MatMul3 { a, b, transpose_b }, ng)
    }

    /// 2-D cross-correlation, NCHW, zero padding, odd square-ish kernels.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        pad: usize,
    ) -> Result<NodeId, NnError> {
        let (xd, wd, bd) = (self.dims(x).to_vec(), self.dims(w).to_vec(), self.dims(b).to_vec());
        if xd.len() != 4 || wd.len() != 4 || bd.len() != 1 {
            return Err(NnError::ShapeMismatch {
                op: "conv2d",
                detail: format!("x {:?}, w {:?}, b {:?}", xd, wd, bd),
            });
        }
        let (n, ci, h, wdt) = (xd[0], xd[1], xd[2], xd[3]);
        let (co, wci, kh, kw) = (wd[0], wd[1], wd[2], wd[3]);
        if ci != wci || bd[0] != co {
            return Err(NnError::ShapeMismatch {
                op: "conv2d",
                detail: format!("channels: x {:?}, w {:?}, b {:?}", xd, wd, bd),
            });
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(NnError::ShapeMismatch {
                op: "conv2d",
                detail: format!("kernel sides must be odd, got {}x{}", kh, kw),
            });
        }
        if h + 2 * pad < kh || wdt + 2 * pad < kw || stride == 0 {
            return Err(NnError::ShapeMismatch {
                op: "conv2d",
                detail: format!("kernel {}x{} does not fit input {:?} with pad {}", kh, kw, xd, pad),
            });
        }
        let ho = conv_out_len(h, kh, stride, pad);
        let wo = conv_out_len(wdt, kw, stride, pad);
        let k = ci * kh * kw;
        let m = ho * wo;
        let mut out = vec![0.0; n * co * m];
        let mut cols = vec![0.0; k * m];
        {
            let xv = self.data(x);
            let wv = self.data(w);
            let bv = self.data(b);
            for s in 0..n {
                im2col(&xv[s * ci * h * wdt..], ci, h, wdt, kh, kw, stride, pad, &mut cols);
                let out_s = &mut out[s * co * m..(s + 1) * co * m];
                for c in 0..co {
                    out_s[c * m..(c + 1) * m].fill(bv[c]);
                }
                matmul_acc(wv, co, k, &cols, m, out_s);
            }
        }
        let value = Tensor::from_vec_unchecked(&[n, co, ho, wo], out);
        let ng = self.needs_grad(x) || self.needs_grad(w) || self.needs_grad(b);
        self.push(
            "conv2d",
            value,
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
            },
            ng,
        )
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let data = self.data(x).iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let value = Tensor::from_vec_unchecked(self.dims(x), data);
        let ng = self.needs_grad(x);
        self.push("relu", value, Op::Relu(x), ng)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let data = self.data(x).iter().map(|&v| stable_sigmoid(v)).collect();
        let value = Tensor::from_vec_unchecked(self.dims(x), data);
        let ng = self.needs_grad(x);
        self.push("sigmoid", value, Op::Sigmoid(x), ng)
    }

    /// Max pooling with square window `k` and stride `s`. Ties keep the first
    /// maximum in scan order.
    pub fn max_pool2d(&mut self, x: NodeId, k: usize, s: usize) -> Result<NodeId, NnError> {
        let xd = self.dims(x).to_vec();
        if xd.len() != 4 || k == 0 || s == 0 || xd[2] < k || xd[3] < k {
            return Err(NnError::ShapeMismatch {
                op: "max_pool2d",
                detail: format!("x {:?}, k {}, s {}", xd, k, s),
            });
        }
        let (n, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
        let ho = (h - k) / s + 1;
        let wo = (w - k) / s + 1;
        let xv = self.data(x);
        let mut out = vec![0.0; n * c * ho * wo];
        let mut argmax = vec![0usize; n * c * ho * wo];
        for nc in 0..n * c {
            let plane = &xv[nc * h * w..(nc + 1) * h * w];
            let base = nc * ho * wo;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for ky in 0..k {
                        for kx in 0..k {
                            let idx = (oy * s + ky) * w + ox * s + kx;
                            if plane[idx] > best {
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out[base + oy * wo + ox] = best;
                    argmax[base + oy * wo + ox] = nc * h * w + best_idx;
                }
            }
        }
        let value = Tensor::from_vec_unchecked(&[n, c, ho, wo], out);
        let ng = self.needs_grad(x);
        self.push("max_pool2d", value, Op::MaxPool2d { x, argmax }, ng)
    }

    /// `[N,C,H,W] -> [N,C]`, mean over the spatial extent.
    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let xd = self.dims(x).to_vec();
        if xd.len() != 4 {
            return Err(NnError::ShapeMismatch {
                op: "global_avg_pool",
                detail: format!("x {:?}", xd),
            });
        }
        let (n, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
        let hw = h * w;
        let xv = self.data(x);
        let mut out = vec![0.0; n * c];
        for (nc, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &v in &xv[nc * hw..(nc + 1) * hw] {
                acc += v;
            }
            *o = acc / hw as f64;
        }
        let value = Tensor::from_vec_unchecked(&[n, c], out);
        let ng = self.needs_grad(x);
        self.push("global_avg_pool", value, Op::GlobalAvgPool(x), ng)
    }

    /// Bilinear 2× upsampling (half-pixel centres, `align_corners = false`).
    pub fn bilinear_upsample(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let xd = self.dims(x).to_vec();
        if xd.len() != 4 {
            return Err(NnError::ShapeMismatch {
                op: "bilinear_upsample",
                detail: format!("x {:?}", xd),
            });
        }
        let (n, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
        let (oh, ow) = (h * 2, w * 2);
        let xv = self.data(x);
        let mut out = vec![0.0; n * c * oh * ow];
        for nc in 0..n * c {
            let plane = &xv[nc * h * w..(nc + 1) * h * w];
            let dst = &mut out[nc * oh * ow..(nc + 1) * oh * ow];
            for oy in 0..oh {
                let (y0, y1, fy) = bilinear_coord(oy, h, oh);
                for ox in 0..ow {
                    let (x0, x1, fx) = bilinear_coord(ox, w, ow);
                    let v00 = plane[y0 * w + x0];
                    let v01 = plane[y0 * w + x1];
                    let v10 = plane[y1 * w + x0];
                    let v11 = plane[y1 * w + x1];
                    let top = v00 + (v01 - v00) * fx;
                    let bot = v10 + (v11 - v10) * fx;
                    dst[oy * ow + ox] = top + (bot - top) * fy;
                }
            }
        }
        let value = Tensor::from_vec_unchecked(&[n, c, oh, ow], out);
        let ng = self.needs_grad(x);
        self.push("bilinear_upsample", value, Op::Upsample2d { x }, ng)
    }

    /// Layer normalization over axis 1 (feature/channel axis) with learned
    /// per-feature affine. For `[N,F]` the normalized group is a row; for
    /// `[N,C,H,W]` it is the channel vector at each spatial location.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> Result<NodeId, NnError> {
        let xd = self.dims(x).to_vec();
        if xd.len() < 2 {
            return Err(NnError::ShapeMismatch {
                op: "layer_norm",
                detail: format!("x {:?}", xd),
            });
        }
        let feat = xd[1];
        if self.dims(gamma) != [feat] || self.dims(beta) != [feat] {
            return Err(NnError::ShapeMismatch {
                op: "layer_norm",
                detail: format!(
                    "gamma {:?} / beta {:?} vs features {}",
                    self.dims(gamma),
                    self.dims(beta),
                    feat
                ),
            });
        }
        let outer = xd[0];
        let inner: usize = xd[2..].iter().product();
        let xv = self.data(x);
        let gv = self.data(gamma).to_vec();
        let bv = self.data(beta).to_vec();
        let mut out = vec![0.0; xv.len()];
        let mut stats = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * feat * inner + i;
                let mut mean = 0.0;
                for f in 0..feat {
                    mean += xv[base + f * inner];
                }
                mean /= feat as f64;
                let mut var = 0.0;
                for f in 0..feat {
                    let d = xv[base + f * inner] - mean;
                    var += d * d;
                }
                var /= feat as f64;
                let rstd = 1.0 / (var + eps).sqrt();
                for f in 0..feat {
                    let xhat = (xv[base + f * inner] - mean) * rstd;
                    out[base + f * inner] = gv[f] * xhat + bv[f];
                }
                stats.push((mean, rstd));
            }
        }
        let value = Tensor::from_vec_unchecked(&xd, out);
        let ng = self.needs_grad(x) || self.needs_grad(gamma) || self.needs_grad(beta);
        self.push(
            "layer_norm",
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                stats,
            },
            ng,
        )
    }

    /// Numerically stable softmax along `axis`: `exp(x - max) / Σ`.
    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId, NnError> {
        let xd = self.dims(x).to_vec();
        if axis >= xd.len() {
            return Err(NnError::InvalidAxis {
                op: "softmax",
                axis,
                rank: xd.len(),
            });
        }
        let (outer, len, inner) = lanes(&xd, axis);
        let xv = self.data(x);
        let mut out = vec![0.0; xv.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut mx = f64::NEG_INFINITY;
                for l in 0..len {
                    mx = mx.max(xv[base + l * inner]);
                }
                let mut sum = 0.0;
                for l in 0..len {
                    let e = (xv[base + l * inner] - mx).exp();
                    out[base + l * inner] = e;
                    sum += e;
                }
                for l in 0..len {
                    out[base + l * inner] /= sum;
                }
            }
        }
        let value = Tensor::from_vec_unchecked(&xd, out);
        let ng = self.needs_grad(x);
        self.push("softmax", value, Op::Softmax { x, axis }, ng)
    }

    /// Concatenates two tensors along `axis`; all other dims must agree.
    pub fn concat(&mut self, a: NodeId, b: NodeId, axis: usize) -> Result<NodeId, NnError> {
        let (ad, bd) = (self.dims(a).to_vec(), self.dims(b).to_vec());
        if ad.len() != bd.len() || axis >= ad.len() {
            return Err(NnError::ShapeMismatch {
                op: "concat",
                detail: format!("a {:?}, b {:?}, axis {}", ad, bd, axis),
            });
        }
        for (i, (x, y)) in ad.iter().zip(bd.iter()).enumerate() {
            if i != axis && x != y {
                return Err(NnError::ShapeMismatch {
                    op: "concat",
                    detail: format!("a {:?}, b {:?}, axis {}", ad, bd, axis),
                });
            }
        }
        let mut od = ad.clone();
        od[axis] = ad[axis] + bd[axis];
        let outer: usize = ad[..axis].iter().product();
        let inner: usize = ad[axis + 1..].iter().product();
        let a_block = ad[axis] * inner;
        let b_block = bd[axis] * inner;
        let av = self.data(a);
        let bv = self.data(b);
        let mut out = vec![0.0; outer * (a_block + b_block)];
        for o in 0..outer {
            let dst = &mut out[o * (a_block + b_block)..(o + 1) * (a_block + b_block)];
            dst[..a_block].copy_from_slice(&av[o * a_block..(o + 1) * a_block]);
            dst[a_block..].copy_from_slice(&bv[o * b_block..(o + 1) * b_block]);
        }
        let value = Tensor::from_vec_unchecked(&od, out);
        let ng = self.needs_grad(a) || self.needs_grad(b);
        self.push("concat", value, Op::Concat { a, b, axis }, ng)
    }

    /// View under new dims (same element count).
    pub fn reshape(&mut self, x: NodeId, dims: &[usize]) -> Result<NodeId, NnError> {
        let value = self.nodes[x.index()].value.reshaped(dims)?;
        let ng = self.needs_grad(x);
        self.push("reshape", value, Op::Reshape(x), ng)
    }

    /// `[N,C,H,W] -> [N,H·W,C]` token grid for attention.
    pub fn tokens_from_map(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let xd = self.dims(x).to_vec();
        if xd.len() != 4 {
            return Err(NnError::ShapeMismatch {
                op: "tokens_from_map",
                detail: format!("x {:?}", xd),
            });
        }
        let (n, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
        let hw = h * w;
        let xv = self.data(x);
        let mut out = vec![0.0; xv.len()];
        for s in 0..n {
            let src = &xv[s * c * hw..(s + 1) * c * hw];
            let dst = &mut out[s * c * hw..(s + 1) * c * hw];
            for ch in 0..c {
                for t in 0..hw {
                    dst[t * c + ch] = src[ch * hw + t];
                }
            }
        }
        let value = Tensor::from_vec_unchecked(&[n, hw, c], out);
        let ng = self.needs_grad(x);
        self.push("tokens_from_map", value, Op::TokensFromMap(x), ng)
    }

    /// `[N,T,D] -> [N,D]`, mean over tokens.
    pub fn mean_axis1(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let xd = self.dims(x).to_vec();
        if xd.len() != 3 {
            return Err(NnError::ShapeMismatch {
                op: "mean_axis1",
                detail: format!("x {:?}", xd),
            });
        }
        let (n, t, d) = (xd[0], xd[1], xd[2]);
        let xv = self.data(x);
        let mut out = vec![0.0; n * d];
        for s in 0..n {
            let dst = &mut out[s * d..(s + 1) * d];
            for tok in 0..t {
                let src = &xv[s * t * d + tok * d..s * t * d + (tok + 1) * d];
                for (o, &v) in dst.iter_mut().zip(src.iter()) {
                    *o += v;
                }
            }
            for o in dst.iter_mut() {
                *o /= t as f64;
            }
        }
        let value = Tensor::from_vec_unchecked(&[n, d], out);
        let ng = self.needs_grad(x);
        self.push("mean_axis1", value, Op::MeanAxis1(x), ng)
    }

    /// Mean cross-entropy over rows of `[N,K]` logits in the fused logit form
    /// `-z_y + log Σ exp(z)`.
    pub fn ce_rows(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId, NnError> {
        let ld = self.dims(logits).to_vec();
        if ld.len() != 2 || ld[0] != targets.len() {
            return Err(NnError::ShapeMismatch {
                op: "ce_rows",
                detail: format!("logits {:?}, targets {}", ld, targets.len()),
            });
        }
        let (n, k) = (ld[0], ld[1]);
        for &t in targets {
            if t >= k {
                return Err(NnError::LabelOutOfRange { label: t, classes: k });
            }
        }
        let lv = self.data(logits);
        let mut probs = vec![0.0; n * k];
        let mut loss = 0.0;
        for r in 0..n {
            let row = &lv[r * k..(r + 1) * k];
            let lse = stable_row_softmax(row, &mut probs[r * k..(r + 1) * k]);
            loss += lse - row[targets[r]];
        }
        loss /= n as f64;
        let value = Tensor::scalar(loss);
        let ng = self.needs_grad(logits);
        self.push(
            "ce_rows",
            value,
            Op::CeRows {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            ng,
        )
    }

    /// Pixel-wise cross-entropy for `[N,K,H,W]` logits against `[N,H,W]`
    /// labels (flattened row-major), averaged over pixels. Fused logit form.
    pub fn pixelwise_ce(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId, NnError> {
        let ld = self.dims(logits).to_vec();
        if ld.len() != 4 {
            return Err(NnError::ShapeMismatch {
                op: "pixelwise_ce",
                detail: format!("logits {:?}", ld),
            });
        }
        let (n, k, h, w) = (ld[0], ld[1], ld[2], ld[3]);
        if labels.len() != n * h * w {
            return Err(NnError::ShapeMismatch {
                op: "pixelwise_ce",
                detail: format!("labels {} vs {}x{}x{}", labels.len(), n, h, w),
            });
        }
        for &l in labels {
            if l >= k {
                return Err(NnError::LabelOutOfRange { label: l, classes: k });
            }
        }
        let hw = h * w;
        let lv = self.data(logits);
        let mut probs = vec![0.0; lv.len()];
        let mut loss = 0.0;
        let mut lane = vec![0.0; k];
        let mut plane = vec![0.0; k];
        for s in 0..n {
            let base_s = s * k * hw;
            for px in 0..hw {
                for c in 0..k {
                    lane[c] = lv[base_s + c * hw + px];
                }
                let lse = stable_row_softmax(&lane, &mut plane);
                for c in 0..k {
                    probs[base_s + c * hw + px] = plane[c];
                }
                loss += lse - lane[labels[s * hw + px]];
            }
        }
        loss /= (n * hw) as f64;
        let value = Tensor::scalar(loss);
        let ng = self.needs_grad(logits);
        self.push(
            "pixelwise_ce",
            value,
            Op::PixelwiseCe {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            ng,
        )
    }

    /// Mean binary cross-entropy with logits over all elements, in the stable
    /// form `max(z,0) - z·y + ln(1 + exp(-|z|))`.
    pub fn bce_logits(&mut self, logits: NodeId, targets: &[f64]) -> Result<NodeId, NnError> {
        let ld = self.dims(logits).to_vec();
        let n: usize = ld.iter().product();
        if targets.len() != n {
            return Err(NnError::ShapeMismatch {
                op: "bce_logits",
                detail: format!("logits {:?}, targets {}", ld, targets.len()),
            });
        }
        let lv = self.data(logits);
        let mut loss = 0.0;
        for (&z, &y) in lv.iter().zip(targets.iter()) {
            loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        }
        loss /= n as f64;
        let value = Tensor::scalar(loss);
        let ng = self.needs_grad(logits);
        self.push(
            "bce_logits",
            value,
            Op::BceLogits {
                logits,
                targets: targets.to_vec(),
            },
            ng,
        )
    }

    /// Mean squared error against a constant target.
    pub fn mse_loss(&mut self, pred: NodeId, target: &[f64]) -> Result<NodeId, NnError> {
        let n = self.value(pred).numel();
        if target.len() != n {
            return Err(NnError::ShapeMismatch {
                op: "mse_loss",
                detail: format!("pred {} vs target {}", n, target.len()),
            });
        }
        let pv = self.data(pred);
        let mut loss = 0.0;
        for (&p, &t) in pv.iter().zip(target.iter()) {
            let d = p - t;
            loss += d * d;
        }
        loss /= n as f64;
        let value = Tensor::scalar(loss);
        let ng = self.needs_grad(pred);
        self.push(
            "mse_loss",
            value,
            Op::MseLoss {
                pred,
                target: target.to_vec(),
            },
            ng,
        )
    }

    /// `softmax(Q Kᵀ / √d) V` with exposed attention weights.
    ///
    /// Accepts `[T,D]` (single sequence) or `[N,T,D]` batched inputs; the
    /// spectrogram tokens act as queries, mask tokens as keys and values.
    /// Returns `(output, weights)`.
    pub fn scaled_dot_attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
    ) -> Result<(NodeId, NodeId), NnError> {
        let two_d = self.dims(q).len() == 2;
        let (q3, k3, v3) = if two_d {
            let qd = self.dims(q).to_vec();
            let kd = self.dims(k).to_vec();
            let vd = self.dims(v).to_vec();
            (
                self.reshape(q, &[1, qd[0], qd[1]])?,
                self.reshape(k, &[1, kd[0], kd[1]])?,
                self.reshape(v, &[1, vd[0], vd[1]])?,
            )
        } else {
            (q, k, v)
        };
        let d = *self.dims(q3).last().unwrap();
        if self.dims(k3).last() != Some(&d) {
            return Err(NnError::ShapeMismatch {
                op: "scaled_dot_attention",
                detail: format!("q {:?} vs k {:?}", self.dims(q3), self.dims(k3)),
            });
        }
        let scores = self.matmul3(q3, k3, true)?;
        let scaled = self.scale(scores, 1.0 / (d as f64).sqrt())?;
        let weights = self.softmax(scaled, 2)?;
        let out = self.matmul3(weights, v3, false)?;
        if two_d {
            let od = self.dims(out).to_vec();
            let wd = self.dims(weights).to_vec();
            let out2 = self.reshape(out, &[od[1], od[2]])?;
            let w2 = self.reshape(weights, &[wd[1], wd[2]])?;
            Ok((out2, w2))
        } else {
            Ok((out, weights))
        }
    }

    fn same_dims(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), NnError> {
        if self.dims(a) != self.dims(b) {
            return Err(NnError::ShapeMismatch {
                op,
                detail: format!("{:?} vs {:?}", self.dims(a), self.dims(b)),
            });
        }
        Ok(())
    }

    /// Reverse pass from a scalar loss node. Returns per-node gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Grads, NnError> {
        if self.value(loss).numel() != 1 {
            return Err(NnError::ShapeMismatch {
                op: "backward",
                detail: format!("loss must be scalar, got {:?}", self.dims(loss)),
            });
        }
        let mut grads = Grads {
            by_node: (0..self.nodes.len()).map(|_| None).collect(),
        };
        grads.by_node[loss.index()] = Some(vec![1.0]);
        for id in (0..=loss.index()).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let dy = match grads.by_node[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(NodeId(id), &dy, &mut grads)?;
            grads.by_node[id] = Some(dy);
        }
        Ok(grads)
    }

    /// Per-parameter-slot gradients from a finished backward pass, in
    /// ascending node order.
    pub fn param_grads<'g>(&self, grads: &'g Grads) -> Vec<(usize, &'g [f64])> {
        let mut out = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(slot) } = node.op {
                if let Some(g) = &grads.by_node[i] {
                    out.push((slot, g.as_slice()));
                }
            }
        }
        out
    }

    #[allow(clippy::too_many_lines)]
    fn propagate(&self, id: NodeId, dy: &[f64], grads: &mut Grads) -> Result<(), NnError> {
        let node = &self.nodes[id.index()];
        match &node.op {
            Op::Leaf { .. } => {}
            Op::Add(a, b) => {
                for (g, &d) in grads.slot(*a, dy.len()).iter_mut().zip(dy) {
                    *g += d;
                }
                for (g, &d) in grads.slot(*b, dy.len()).iter_mut().zip(dy) {
                    *g += d;
                }
            }
            Op::Mul(a, b) => {
                let av = self.data(*a).to_vec();
                let bv = self.data(*b).to_vec();
                for ((g, &d), &v) in grads.slot(*a, dy.len()).iter_mut().zip(dy).zip(bv.iter()) {
                    *g += d * v;
                }
                for ((g, &d), &v) in grads.slot(*b, dy.len()).iter_mut().zip(dy).zip(av.iter()) {
                    *g += d * v;
                }
            }
            Op::Scale(a, c) => {
                for (g, &d) in grads.slot(*a, dy.len()).iter_mut().zip(dy) {
                    *g += d * c;
                }
            }
            Op::Linear { x, w, b } => {
                let xd = self.dims(*x);
                let wd = self.dims(*w);
                let (n, i, o) = (xd[0], xd[1], wd[0]);
                let xv = self.data(*x);
                let wv = self.data(*w);
                if self.needs_grad(*x) {
                    let dx = grads.slot(*x, n * i);
                    matmul_acc(dy, n, o, wv, i, dx);
                }
                if self.needs_grad(*w) {
                    let dyt = transpose(dy, n, o);
                    let dw = grads.slot(*w, o * i);
                    matmul_acc(&dyt, o, n, xv, i, dw);
                }
                if self.needs_grad(*b) {
                    let db = grads.slot(*b, o);
                    for r in 0..n {
                        for (c, g) in db.iter_mut().enumerate() {
                            *g += dy[r * o + c];
                        }
                    }
                }
            }
            Op::MatMul3 { a, b, transpose_b } => {
                let ad = self.dims(*a).to_vec();
                let bd = self.dims(*b).to_vec();
                let (n, p, q) = (ad[0], ad[1], ad[2]);
                let r = if *transpose_b { bd[1] } else { bd[2] };
                let av = self.data(*a).to_vec();
                let bv = self.data(*b).to_vec();
                let need_a = self.needs_grad(*a);
                let need_b = self.needs_grad(*b);
                if need_a {
                    let da = grads.slot(*a, av.len());
                    for s in 0..n {
                        let dys = &dy[s * p * r..(s + 1) * p * r];
                        let das = &mut da[s * p * q..(s + 1) * p * q];
                        if *transpose_b {
                            let bs = &bv[s * r * q..(s + 1) * r * q];
                            matmul_acc(dys, p, r, bs, q, das);
                        } else {
                            let bs = &bv[s * q * r..(s + 1) * q * r];
                            let bt = transpose(bs, q, r);
                            matmul_acc(dys, p, r, &bt, q, das);
                        }
                    }
                }
                if need_b {
                    let db = grads.slot(*b, bv.len());
                    for s in 0..n {
                        let dys = &dy[s * p * r..(s + 1) * p * r];
                        let as_ = &av[s * p * q..(s + 1) * p * q];
                        if *transpose_b {
                            let dyt = transpose(dys, p, r);
                            let dbs = &mut db[s * r * q..(s + 1) * r * q];
                            matmul_acc(&dyt, r, p, as_, q, dbs);
                        } else {
                            let at = transpose(as_, p, q);
                            let dbs = &mut db[s * q * r..(s + 1) * q * r];
                            matmul_acc(&at, q, p, dys, r, dbs);
                        }
                    }
                }
            }
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
            } => {
                let xd = self.dims(*x).to_vec();
                let wd = self.dims(*w).to_vec();
                let (n, ci, h, wdt) = (xd[0], xd[1], xd[2], xd[3]);
                let (co, _, kh, kw) = (wd[0], wd[1], wd[2], wd[3]);
                let ho = conv_out_len(h, kh, *stride, *pad);
                let wo = conv_out_len(wdt, kw, *stride, *pad);
                let k = ci * kh * kw;
                let m = ho * wo;
                let xv = self.data(*x).to_vec();
                let wv = self.data(*w).to_vec();
                let need_x = self.needs_grad(*x);
                let need_w = self.needs_grad(*w);
                let need_b = self.needs_grad(*b);
                let mut cols = vec![0.0; k * m];
                let wt = if need_x {
                    transpose(&wv, co, k)
                } else {
                    Vec::new()
                };
                let mut dcols = vec![0.0; k * m];
                for s in 0..n {
                    let dys = &dy[s * co * m..(s + 1) * co * m];
                    if need_w {
                        im2col(&xv[s * ci * h * wdt..], ci, h, wdt, kh, kw, *stride, *pad, &mut cols);
                        let colst = transpose(&cols, k, m);
                        let dw = grads.slot(*w, co * k);
                        matmul_acc(dys, co, m, &colst, k, dw);
                    }
                    if need_b {
                        let db = grads.slot(*b, co);
                        for (c, g) in db.iter_mut().enumerate() {
                            let mut acc = 0.0;
                            for &v in &dys[c * m..(c + 1) * m] {
                                acc += v;
                            }
                            *g += acc;
                        }
                    }
                    if need_x {
                        dcols.fill(0.0);
                        matmul_acc(&wt, k, co, dys, m, &mut dcols);
                        let dx = grads.slot(*x, xv.len());
                        col2im_acc(
                            &dcols,
                            ci,
                            h,
                            wdt,
                            kh,
                            kw,
                            *stride,
                            *pad,
                            &mut dx[s * ci * h * wdt..(s + 1) * ci * h * wdt],
                        );
                    }
                }
            }
            Op::Relu(x) => {
                let xv = self.data(*x).to_vec();
                let dx = grads.slot(*x, xv.len());
                for ((g, &d), &v) in dx.iter_mut().zip(dy).zip(xv.iter()) {
                    if v > 0.0 {
                        *g += d;
                    }
                }
            }
            Op::Sigmoid(x) => {
                let yv = node.value.data().to_vec();
                let dx = grads.slot(*x, yv.len());
                for ((g, &d), &s) in dx.iter_mut().zip(dy).zip(yv.iter()) {
                    *g += d * s * (1.0 - s);
                }
            }
            Op::MaxPool2d { x, argmax } => {
                let numel = self.value(*x).numel();
                let dx = grads.slot(*x, numel);
                for (&src, &d) in argmax.iter().zip(dy) {
                    dx[src] += d;
                }
            }
            Op::GlobalAvgPool(x) => {
                let xd = self.dims(*x).to_vec();
                let hw = xd[2] * xd[3];
                let dx = grads.slot(*x, self.value(*x).numel());
                for (nc, &d) in dy.iter().enumerate() {
                    let v = d / hw as f64;
                    for g in &mut dx[nc * hw..(nc + 1) * hw] {
                        *g += v;
                    }
                }
            }
            Op::Upsample2d { x } => {
                let xd = self.dims(*x).to_vec();
                let (n, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
                let (oh, ow) = (h * 2, w * 2);
                let dx = grads.slot(*x, n * c * h * w);
                for nc in 0..n * c {
                    let src = &dy[nc * oh * ow..(nc + 1) * oh * ow];
                    let dst = &mut dx[nc * h * w..(nc + 1) * h * w];
                    for oy in 0..oh {
                        let (y0, y1, fy) = bilinear_coord(oy, h, oh);
                        for ox in 0..ow {
                            let (x0, x1, fx) = bilinear_coord(ox, w, ow);
                            let d = src[oy * ow + ox];
                            dst[y0 * w + x0] += d * (1.0 - fy) * (1.0 - fx);
                            dst[y0 * w + x1] += d * (1.0 - fy) * fx;
                            dst[y1 * w + x0] += d * fy * (1.0 - fx);
                            dst[y1 * w + x1] += d * fy * fx;
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                stats,
            } => {
                let xd = self.dims(*x).to_vec();
                let feat = xd[1];
                let outer = xd[0];
                let inner: usize = xd[2..].iter().product();
                let xv = self.data(*x).to_vec();
                let gv = self.data(*gamma).to_vec();
                let need_x = self.needs_grad(*x);
                let need_g = self.needs_grad(*gamma);
                let need_b = self.needs_grad(*beta);
                let mut dgamma = vec![0.0; feat];
                let mut dbeta = vec![0.0; feat];
                if need_x {
                    let dx = grads.slot(*x, xv.len());
                    for o in 0..outer {
                        for i in 0..inner {
                            let base = o * feat * inner + i;
                            let (mean, rstd) = stats[o * inner + i];
                            let mut sum_dyg = 0.0;
                            let mut sum_dyg_xhat = 0.0;
                            for f in 0..feat {
                                let idx = base + f * inner;
                                let xhat = (xv[idx] - mean) * rstd;
                                let dg = dy[idx] * gv[f];
                                sum_dyg += dg;
                                sum_dyg_xhat += dg * xhat;
                                dgamma[f] += dy[idx] * xhat;
                                dbeta[f] += dy[idx];
                            }
                            let inv_feat = 1.0 / feat as f64;
                            for f in 0..feat {
                                let idx = base + f * inner;
                                let xhat = (xv[idx] - mean) * rstd;
                                let dg = dy[idx] * gv[f];
                                dx[idx] += rstd
                                    * (dg - inv_feat * sum_dyg - xhat * inv_feat * sum_dyg_xhat);
                            }
                        }
                    }
                } else {
                    for o in 0..outer {
                        for i in 0..inner {
                            let base = o * feat * inner + i;
                            let (mean, rstd) = stats[o * inner + i];
                            for f in 0..feat {
                                let idx = base + f * inner;
                                let xhat = (xv[idx] - mean) * rstd;
                                dgamma[f] += dy[idx] * xhat;
                                dbeta[f] += dy[idx];
                            }
                        }
                    }
                }
                if need_g {
                    for (g, d) in grads.slot(*gamma, feat).iter_mut().zip(dgamma.iter()) {
                        *g += d;
                    }
                }
                if need_b {
                    for (g, d) in grads.slot(*beta, feat).iter_mut().zip(dbeta.iter()) {
                        *g += d;
                    }
                }
            }
            Op::Softmax { x, axis } => {
                let xd = self.dims(*x).to_vec();
                let (outer, len, inner) = lanes(&xd, *axis);
                let yv = node.value.data().to_vec();
                let dx = grads.slot(*x, yv.len());
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * len * inner + i;
                        let mut dot = 0.0;
                        for l in 0..len {
                            let idx = base + l * inner;
                            dot += dy[idx] * yv[idx];
                        }
                        for l in 0..len {
                            let idx = base + l * inner;
                            dx[idx] += (dy[idx] - dot) * yv[idx];
                        }
                    }
                }
            }
            Op::Concat { a, b, axis } => {
                let ad = self.dims(*a).to_vec();
                let bd = self.dims(*b).to_vec();
                let outer: usize = ad[..*axis].iter().product();
                let inner: usize = ad[*axis + 1..].iter().product();
                let a_block = ad[*axis] * inner;
                let b_block = bd[*axis] * inner;
                let need_a = self.needs_grad(*a);
                let need_b = self.needs_grad(*b);
                if need_a {
                    let da = grads.slot(*a, outer * a_block);
                    for o in 0..outer {
                        let src = &dy[o * (a_block + b_block)..o * (a_block + b_block) + a_block];
                        for (g, &d) in da[o * a_block..(o + 1) * a_block].iter_mut().zip(src) {
                            *g += d;
                        }
                    }
                }
                if need_b {
                    let db = grads.slot(*b, outer * b_block);
                    for o in 0..outer {
                        let src = &dy[o * (a_block + b_block) + a_block..(o + 1) * (a_block + b_block)];
                        for (g, &d) in db[o * b_block..(o + 1) * b_block].iter_mut().zip(src) {
                            *g += d;
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                for (g, &d) in grads.slot(*x, dy.len()).iter_mut().zip(dy) {
                    *g += d;
                }
            }
            Op::TokensFromMap(x) => {
                let xd = self.dims(*x).to_vec();
                let (n, c, h, w) = (xd[0], xd[1], xd[2], xd[3]);
                let hw = h * w;
                let dx = grads.slot(*x, n * c * hw);
                for s in 0..n {
                    let src = &dy[s * c * hw..(s + 1) * c * hw];
                    let dst = &mut dx[s * c * hw..(s + 1) * c * hw];
                    for ch in 0..c {
                        for t in 0..hw {
                            dst[ch * hw + t] += src[t * c + ch];
                        }
                    }
                }
            }
            Op::MeanAxis1(x) => {
                let xd = self.dims(*x).to_vec();
                let (n, t, d) = (xd[0], xd[1], xd[2]);
                let dx = grads.slot(*x, n * t * d);
                let inv = 1.0 / t as f64;
                for s in 0..n {
                    for tok in 0..t {
                        let dst = &mut dx[s * t * d + tok * d..s * t * d + (tok + 1) * d];
                        let src = &dy[s * d..(s + 1) * d];
                        for (g, &v) in dst.iter_mut().zip(src) {
                            *g += v * inv;
                        }
                    }
                }
            }
            Op::CeRows {
                logits,
                targets,
                probs,
            } => {
                let ld = self.dims(*logits).to_vec();
                let (n, k) = (ld[0], ld[1]);
                let scale = dy[0] / n as f64;
                let dl = grads.slot(*logits, n * k);
                for r in 0..n {
                    for c in 0..k {
                        let idx = r * k + c;
                        let onehot = if c == targets[r] { 1.0 } else { 0.0 };
                        dl[idx] += scale * (probs[idx] - onehot);
                    }
                }
            }
            Op::PixelwiseCe {
                logits,
                labels,
                probs,
            } => {
                let ld = self.dims(*logits).to_vec();
                let (n, k, h, w) = (ld[0], ld[1], ld[2], ld[3]);
                let hw = h * w;
                let scale = dy[0] / (n * hw) as f64;
                let dl = grads.slot(*logits, n * k * hw);
                for s in 0..n {
                    let base_s = s * k * hw;
                    for px in 0..hw {
                        let lab = labels[s * hw + px];
                        for c in 0..k {
                            let idx = base_s + c * hw + px;
                            let onehot = if c == lab { 1.0 } else { 0.0 };
                            dl[idx] += scale * (probs[idx] - onehot);
                        }
                    }
                }
            }
            Op::BceLogits { logits, targets } => {
                let lv = self.data(*logits).to_vec();
                let scale = dy[0] / lv.len() as f64;
                let dl = grads.slot(*logits, lv.len());
                for ((g, &z), &y) in dl.iter_mut().zip(lv.iter()).zip(targets.iter()) {
                    *g += scale * (stable_sigmoid(z) - y);
                }
            }
            Op::MseLoss { pred, target } => {
                let pv = self.data(*pred).to_vec();
                let scale = dy[0] * 2.0 / pv.len() as f64;
                let dp = grads.slot(*pred, pv.len());
                for ((g, &p), &t) in dp.iter_mut().zip(pv.iter()).zip(target.iter()) {
                    *g += scale * (p - t);
                }
            }
        }
        Ok(())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn lanes(dims: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer: usize = dims[..axis].iter().product();
    let len = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    (outer, len, inner)
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fills `probs` with the stable softmax of `row` and returns `logsumexp(row)`.
fn stable_row_softmax(row: &[f64], probs: &mut [f64]) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for &v in row {
        mx = mx.max(v);
    }
    let mut sum = 0.0;
    for (p, &v) in probs.iter_mut().zip(row) {
        let e = (v - mx).exp();
        *p = e;
        sum += e;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    mx + sum.ln()
}
