//! Dense row-major tensors in double precision.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::NnError;

/// A dense tensor with row-major storage. All engine arithmetic is `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
}

impl Tensor {
    /// Builds a tensor from a buffer, validating length and finiteness.
    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(NnError::ShapeMismatch {
                op: "tensor",
                detail: format!("dims {:?} need {} values, got {}", dims, n, data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(NnError::NonFinite { op: "tensor" });
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
            requires_grad: false,
        })
    }

    /// Internal constructor for op outputs: validates length only, leaving
    /// the finiteness check to the tape (which names the producing op).
    pub(crate) fn from_vec_unchecked(dims: &[usize], data: Vec<f64>) -> Self {
        let n: usize = dims.iter().product();
        assert_eq!(n, data.len(), "op output buffer length mismatch");
        Self {
            dims: dims.to_vec(),
            data,
            requires_grad: false,
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; n],
            requires_grad: false,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            dims: vec![1],
            data: vec![v],
            requires_grad: false,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, flag: bool) {
        self.requires_grad = flag;
    }

    /// Scalar value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    /// Same buffer under new dims; element count must match.
    pub fn reshaped(&self, dims: &[usize]) -> Result<Self, NnError> {
        let n: usize = dims.iter().product();
        if n != self.data.len() {
            return Err(NnError::ShapeMismatch {
                op: "reshape",
                detail: format!("cannot view {:?} as {:?}", self.dims, dims),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            data: self.data.clone(),
            requires_grad: self.requires_grad,
        })
    }
}
