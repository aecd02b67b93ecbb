//! Dense matrices, a reverse-mode tape, Adam, and named-tensor checkpoints.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod tape;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, Adam, AdamState};
pub use checkpoint::{Bound, Checkpoint, ParamStore};
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("missing tensor '{0}'")]
    Missing(String),
    #[error("checkpoint format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Row-major dense matrix of finite doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TensorError::Shape {
                op: "new",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite("new"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Constructor for data already known to be finite and well-shaped.
    pub(crate) fn raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        assert!(v.is_finite());
        Self::raw(rows, cols, vec![v; rows * cols])
    }

    pub fn scalar(v: f64) -> Self {
        Self::filled(1, 1, v)
    }

    pub fn row(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::new(1, n, data).expect("finite row")
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data).expect("finite generator")
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
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

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Sets one entry; the value must be finite.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(v.is_finite(), "non-finite entry");
        self.data[i * self.cols + j] = v;
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.len(), 1, "item() on a non-scalar tensor");
        self.data[0]
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::raw(self.cols, self.rows, out)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(TensorError::Shape {
                op: "matmul",
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(Self::raw(self.rows, other.cols, matmul_nn(&self.data, &other.data, self.rows, self.cols, other.cols)))
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// In-place `self += other`.
    pub(crate) fn accumulate(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `a (n×k) · b (k×m)`.
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let x = a[i * k + p];
            if x == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, y) in row.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    out
}

/// `a (n×k) · bᵀ` where `b` is `m×k`.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b[j * k..(j + 1) * k];
            out[i * m + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `aᵀ · b` where `a` is `k×n` and `b` is `k×m`.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], k: usize, n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for p in 0..k {
        let arow = &a[p * n..(p + 1) * n];
        let brow = &b[p * m..(p + 1) * m];
        for (i, &x) in arow.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &mut out[i * m..(i + 1) * m];
            for (o, y) in row.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
