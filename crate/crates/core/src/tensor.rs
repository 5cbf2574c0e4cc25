//! Dense row-major `f64` arrays.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An n-dimensional array of 64-bit reals in row-major order.
///
/// Tensors built through [`Tensor::new`] are checked for a consistent length
/// and for finite entries. Values produced inside the tape are not re-checked
/// on construction; the tape reports non-finite nodes on evaluation instead.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::BadLength { shape, len: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { what: "tensor entry" });
        }
        Ok(Self { shape, data })
    }

    /// Builds a tensor without the finiteness check.
    pub(crate) fn from_raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Self { shape, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_raw(Vec::new(), vec![v])
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self::from_raw(vec![data.len()], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        Self::from_raw(shape.to_vec(), vec![v; numel(shape)])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// The single value of a tensor with one element.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.data.len() {
            return Err(Error::BadLength { shape: shape.to_vec(), len: self.data.len() });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Row `i` of the leading axis as a flat slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let stride = self.row_len();
        &self.data[i * stride..(i + 1) * stride]
    }

    /// Number of entries per element of the leading axis.
    pub fn row_len(&self) -> usize {
        if self.shape.is_empty() {
            1
        } else {
            numel(&self.shape[1..])
        }
    }

    /// Stacks rows selected by `indices` along a new leading axis.
    pub fn gather_rows(&self, indices: &[usize]) -> Self {
        let stride = self.row_len();
        let mut data = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Self::from_raw(shape, data)
    }

    /// Concatenates tensors along the leading axis.
    pub fn stack_rows(parts: &[Tensor]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| crate::error::invalid("stack_rows of nothing"))?;
        let tail = &first.shape[1..];
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.rank() == 0 || &p.shape[1..] != tail {
                return Err(Error::ShapeMismatch {
                    op: "stack_rows",
                    detail: alloc::format!("{:?} vs {:?}", p.shape, first.shape),
                });
            }
            rows += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        let mut shape = first.shape.clone();
        shape[0] = rows;
        Ok(Self::from_raw(shape, data))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
