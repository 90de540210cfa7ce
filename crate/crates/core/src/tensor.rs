//! Dense f64 tensors in row-major order, plus the raw kernels the tape replays.
//!
//! Storage is a flat `Vec<f64>`; only the trailing-vector bias add broadcasts.
//! Everything here is deterministic: fixed loop order, fixed accumulation
//! order, no threading.

use thiserror::Error;

/// Errors raised by tensor construction and raw kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("data length {len} does not match shape {shape:?} (numel {numel})")]
    DataLength {
        shape: Vec<usize>,
        numel: usize,
        len: usize,
    },
    #[error("matmul inner dimensions differ: left {left:?} vs right {right:?}")]
    MatmulMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Mismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("expected a matrix, got shape {got:?}")]
    NotMatrix { got: Vec<usize> },
    #[error("zero-sized dimension in shape {shape:?}")]
    ZeroDim { shape: Vec<usize> },
}

/// A dense tensor: ordered positive dimensions over row-major f64 storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    /// Whether gradients should be accumulated for this tensor when it is
    /// registered as a tape leaf.
    pub requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, ShapeError> {
        if shape.iter().any(|&d| d == 0) {
            return Err(ShapeError::ZeroDim { shape });
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(ShapeError::DataLength {
                numel,
                len: data.len(),
                shape,
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
            requires_grad: false,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
            requires_grad: false,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ShapeError> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Rows of a matrix; a 1-d tensor counts as a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            _ => self.shape[..self.shape.len() - 1].iter().product(),
        }
    }

    /// Trailing dimension.
    pub fn cols(&self) -> usize {
        *self.shape.last().expect("tensor has at least one dim")
    }
}

// ---- raw kernels -------------------------------------------------------
//
// All matmul kernels accumulate into `out` (callers zero it first). Loop
// orders are chosen so the innermost loop runs contiguously over both the
// output row and one input row, which lets LLVM vectorize the f64 FMAs.

/// out[m x n] += a[m x k] . b[k x n]
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for (arow, crow) in a.chunks_exact(k).zip(out.chunks_exact_mut(n)) {
        for (&aik, brow) in arow.iter().zip(b.chunks_exact(n)) {
            for (c, &bv) in crow.iter_mut().zip(brow) {
                *c += aik * bv;
            }
        }
    }
    let _ = m;
}

/// out[m x n] += a[m x k] . b[n x k]^T
///
/// Implemented as transpose-then-nn so the inner loop stays contiguous; a
/// straight dot-product loop serializes on one accumulator and is several
/// times slower under strict f64 semantics.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut bt = vec![0.0; k * n];
    transpose(b, n, k, &mut bt);
    matmul_nn(a, &bt, m, k, n, out);
}

/// out[m x n] += a[k x m]^T . b[k x n]
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], k: usize, m: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for (arow, brow) in a.chunks_exact(m).zip(b.chunks_exact(n)) {
        for (&av, crow) in arow.iter().zip(out.chunks_exact_mut(n)) {
            for (c, &bv) in crow.iter_mut().zip(brow) {
                *c += av * bv;
            }
        }
    }
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(out.len(), rows * cols);
    for (r, arow) in a.chunks_exact(cols).enumerate() {
        for (c, &v) in arow.iter().enumerate() {
            out[c * rows + r] = v;
        }
    }
}

/// Tanh-approximate GELU and its derivative.
pub(crate) fn gelu(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.7978845608028654;
    const C: f64 = 0.044715;
    let u = SQRT_2_OVER_PI * (x + C * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.7978845608028654;
    const C: f64 = 0.044715;
    let u = SQRT_2_OVER_PI * (x + C * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * C * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_rejects_bad_length() {
        let err = Tensor::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, ShapeError::DataLength { .. }));
    }

    #[test]
    fn matmul_kernels_agree() {
        // a: 2x3, b: 3x2
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0];
        let mut c_nn = vec![0.0; 4];
        matmul_nn(&a, &b, 2, 3, 2, &mut c_nn);
        assert_eq!(c_nn, vec![58.0, 64.0, 139.0, 154.0]);

        // nt with b stored transposed (2x3) must match
        let mut bt = vec![0.0; 6];
        transpose(&b, 3, 2, &mut bt);
        let mut c_nt = vec![0.0; 4];
        matmul_nt(&a, &bt, 2, 3, 2, &mut c_nt);
        assert_eq!(c_nt, c_nn);

        // tn with a stored transposed (3x2) must match
        let mut at = vec![0.0; 6];
        transpose(&a, 2, 3, &mut at);
        let mut c_tn = vec![0.0; 4];
        matmul_tn(&at, &b, 3, 2, 2, &mut c_tn);
        assert_eq!(c_tn, c_nn);
    }

    #[test]
    fn gelu_matches_finite_difference() {
        for &x in &[-3.0, -1.0, -0.1, 0.0, 0.5, 2.5] {
            let h = 1e-6;
            let num = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - num).abs() < 1e-8, "x={x}");
        }
    }
}
