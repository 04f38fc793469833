//! Dense real tensor, row-major, f64.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || data.len() != expect {
            return Err(Error::DimensionMismatch(format!(
                "tensor shape {shape:?} needs {expect} elements, got {}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Tensor"));
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Leading extent, interpreted as the batch dimension.
    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Per-sample element count (everything after the batch dimension).
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// Row `i` of a batched tensor.
    pub fn sample(&self, i: usize) -> &[f64] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    /// New tensor containing the given batch rows, in order.
    pub fn gather_rows(&self, rows: &[usize]) -> Tensor {
        let len = self.sample_len();
        let mut data = Vec::with_capacity(rows.len() * len);
        for &r in rows {
            data.extend_from_slice(self.sample(r));
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Tensor::from_parts(shape, data)
    }
}
