//! Forward and backward passes for the affine / ReLU / softmax-cross-entropy
//! building blocks.
//!
//! All gradients accumulate into explicit per-parameter buffers that the
//! caller zeroes at the start of each batch; nothing here applies a learning
//! rate. Everything is 64-bit: the finite-difference checks in this crate run
//! at tolerances that 32-bit arithmetic cannot meet.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Standard deviation used for seeded weight initialization.
pub const INIT_STDDEV: f64 = 0.1;

/// A fully connected layer `out = x·W + b` with gradient buffers shaped like
/// the parameters.
#[derive(Debug, Clone)]
pub struct AffineLayer {
    weight: Matrix,
    bias: Vec<f64>,
    grad_weight: Matrix,
    grad_bias: Vec<f64>,
}

impl AffineLayer {
    /// Seeded init: weights from N(0, 0.1²), biases zero.
    pub fn init<R: Rng>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let mut weight = Matrix::zeros(d_in, d_out);
        for w in weight.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = INIT_STDDEV * z;
        }
        AffineLayer {
            weight,
            bias: vec![0.0; d_out],
            grad_weight: Matrix::zeros(d_in, d_out),
            grad_bias: vec![0.0; d_out],
        }
    }

    /// Rebuilds a layer from explicit parameters (checkpoint loading).
    pub fn from_parts(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::ShapeMismatch {
                op: "affine_from_parts",
                left: weight.shape(),
                right: (1, bias.len()),
            });
        }
        let grad_weight = Matrix::zeros(weight.rows(), weight.cols());
        let grad_bias = vec![0.0; bias.len()];
        Ok(AffineLayer {
            weight,
            bias,
            grad_weight,
            grad_bias,
        })
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut Matrix {
        &mut self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn grad_weight(&self) -> &Matrix {
        &self.grad_weight
    }

    pub fn grad_bias(&self) -> &[f64] {
        &self.grad_bias
    }

    pub fn grad_weight_mut(&mut self) -> &mut Matrix {
        &mut self.grad_weight
    }

    pub fn grad_bias_mut(&mut self) -> &mut [f64] {
        &mut self.grad_bias
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.fill(0.0);
        self.grad_bias.fill(0.0);
    }

    /// Weight entries and their gradient, borrowed together for an optimizer
    /// step.
    pub fn weight_param(&mut self) -> (&mut [f64], &[f64]) {
        (self.weight.data_mut(), self.grad_weight.data())
    }

    /// Bias entries and their gradient, borrowed together for an optimizer
    /// step.
    pub fn bias_param(&mut self) -> (&mut [f64], &[f64]) {
        (&mut self.bias, &self.grad_bias)
    }

    /// `out[n] = x[n]·W + b`.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.weight.rows() {
            return Err(Error::ShapeMismatch {
                op: "affine_forward",
                left: x.shape(),
                right: self.weight.shape(),
            });
        }
        let mut out = x.matmul(&self.weight)?;
        for n in 0..out.rows() {
            for (o, &b) in out.row_mut(n).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Accumulates `grad_weight += xᵀ·grad_out`, `grad_bias += column sums of
    /// grad_out`, and returns the gradient w.r.t. the input,
    /// `grad_out · Wᵀ`.
    pub fn backward(&mut self, x: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
        if x.cols() != self.weight.rows() {
            return Err(Error::ShapeMismatch {
                op: "affine_backward",
                left: x.shape(),
                right: self.weight.shape(),
            });
        }
        if grad_out.shape() != (x.rows(), self.weight.cols()) {
            return Err(Error::ShapeMismatch {
                op: "affine_backward",
                left: grad_out.shape(),
                right: (x.rows(), self.weight.cols()),
            });
        }
        let gw = x.matmul_transpose_self(grad_out)?;
        for (acc, g) in self.grad_weight.data_mut().iter_mut().zip(gw.data()) {
            *acc += g;
        }
        for n in 0..grad_out.rows() {
            for (acc, &g) in self.grad_bias.iter_mut().zip(grad_out.row(n)) {
                *acc += g;
            }
        }
        grad_out.matmul_transpose_rhs(&self.weight)
    }
}

/// Elementwise `max(0, x)`.
pub fn relu_forward(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Zeroes the upstream gradient wherever `x <= 0`.
pub fn relu_backward(x: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    if x.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch {
            op: "relu_backward",
            left: x.shape(),
            right: grad_out.shape(),
        });
    }
    let mut out = grad_out.clone();
    for (g, &v) in out.data_mut().iter_mut().zip(x.data()) {
        if v <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(out)
}

/// Mean softmax cross-entropy over a batch of two-way logits.
///
/// `labels[n]` selects the correct column (`false` -> 0, `true` -> 1).
/// Returns the scalar loss and `(softmax - onehot) / N`, the gradient with
/// respect to the logits.
pub fn softmax_xent(logits: &Matrix, labels: &[bool]) -> Result<(f64, Matrix)> {
    let n = logits.rows();
    if n == 0 {
        return Err(Error::EmptyInput("softmax_xent batch"));
    }
    if logits.cols() != 2 {
        return Err(Error::ShapeMismatch {
            op: "softmax_xent",
            left: logits.shape(),
            right: (n, 2),
        });
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            op: "softmax_xent",
            left: logits.shape(),
            right: (labels.len(), 1),
        });
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = Matrix::zeros(n, 2);
    let mut loss = 0.0;
    for i in 0..n {
        let row = logits.row(i);
        let target = usize::from(labels[i]);
        // log-sum-exp with the max shifted out for stability
        let m = row[0].max(row[1]);
        let lse = m + math::ln(math::exp(row[0] - m) + math::exp(row[1] - m));
        loss += lse - row[target];
        let g = grad.row_mut(i);
        for c in 0..2 {
            let p = math::exp(row[c] - lse);
            g[c] = (p - if c == target { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn layer(weight: &[&[f64]], bias: &[f64]) -> AffineLayer {
        AffineLayer::from_parts(mat(weight), bias.to_vec()).unwrap()
    }

    #[test]
    fn affine_forward_identity_weights() {
        let l = layer(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0]);
        let out = l.forward(&mat(&[&[1.0, 2.0]])).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn affine_forward_zero_input_passes_bias() {
        let l = layer(&[&[0.5, -0.5], &[2.0, 1.0]], &[3.0, 4.0]);
        let out = l.forward(&mat(&[&[0.0, 0.0]])).unwrap();
        assert_eq!(out.data(), &[3.0, 4.0]);
    }

    #[test]
    fn affine_forward_hand_multiply() {
        let l = layer(&[&[2.0, 0.0], &[0.0, 3.0]], &[1.0, 1.0]);
        let out = l.forward(&mat(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(out.data(), &[3.0, 4.0]);
    }

    #[test]
    fn affine_forward_shape_mismatch() {
        let l = layer(&[&[1.0], &[1.0]], &[0.0]);
        let err = l.forward(&mat(&[&[1.0, 2.0, 3.0]])).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn affine_backward_zero_grad_out() {
        let mut l = layer(&[&[1.0, 2.0], &[3.0, 4.0]], &[0.0, 0.0]);
        let x = mat(&[&[1.0, -1.0]]);
        let gx = l.backward(&x, &mat(&[&[0.0, 0.0]])).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(l.grad_weight().data().iter().all(|&v| v == 0.0));
        assert!(l.grad_bias().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn affine_backward_hand_chain_rule() {
        // N=1, x=[[1,0]], W shape 2x1, grad_out=[[1]]
        let mut l = layer(&[&[0.7], &[-0.3]], &[0.0]);
        let x = mat(&[&[1.0, 0.0]]);
        let gx = l.backward(&x, &mat(&[&[1.0]])).unwrap();
        assert_eq!(l.grad_weight().data(), &[1.0, 0.0]);
        assert_eq!(l.grad_bias(), &[1.0]);
        assert_eq!(gx.data(), &[0.7, -0.3]);
    }

    #[test]
    fn affine_backward_matches_finite_differences() {
        // Loss = sum of entries of forward(x); gradient w.r.t. W is checked.
        let x = mat(&[&[0.3, -1.2], &[0.8, 0.4], &[-0.5, 1.1]]);
        let w0 = mat(&[&[0.2, -0.4, 0.9], &[1.1, 0.3, -0.7]]);
        let bias = [0.1, -0.2, 0.05];

        let mut l = AffineLayer::from_parts(w0.clone(), bias.to_vec()).unwrap();
        let out = l.forward(&x).unwrap();
        let ones = Matrix::from_vec(out.rows(), out.cols(), alloc::vec![1.0; out.rows() * out.cols()]).unwrap();
        l.backward(&x, &ones).unwrap();

        let loss = |w: &Matrix| -> Result<f64> {
            let probe = AffineLayer::from_parts(w.clone(), bias.to_vec())?;
            Ok(probe.forward(&x)?.data().iter().sum())
        };
        let report = grad_check(loss, l.grad_weight(), &w0, 1e-4).unwrap();
        assert!(report.max_rel_error < 1e-5, "rel err {}", report.max_rel_error);
    }

    #[test]
    fn relu_forward_and_backward_hand_cases() {
        let x = mat(&[&[-1.0, 2.0]]);
        assert_eq!(relu_forward(&x).data(), &[0.0, 2.0]);
        let g = relu_backward(&x, &mat(&[&[5.0, 5.0]])).unwrap();
        assert_eq!(g.data(), &[0.0, 5.0]);
    }

    #[test]
    fn relu_gradient_away_from_kink() {
        let x = mat(&[&[0.5, -0.7, 1.2, -0.01]]);
        let gx = relu_backward(&x, &mat(&[&[1.0, 1.0, 1.0, 1.0]])).unwrap();
        let loss = |m: &Matrix| -> Result<f64> { Ok(relu_forward(m).data().iter().sum()) };
        let report = grad_check(loss, &gx, &x, 1e-4).unwrap();
        assert!(report.max_rel_error < 1e-5, "rel err {}", report.max_rel_error);
    }

    #[test]
    fn xent_uniform_logits_is_ln_two() {
        let (loss, _) = softmax_xent(&mat(&[&[0.0, 0.0]]), &[false]).unwrap();
        assert!((loss - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn xent_saturated_correct_is_near_zero() {
        let (loss, _) = softmax_xent(&mat(&[&[100.0, -100.0]]), &[false]).unwrap();
        assert!(loss.abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn xent_rejects_empty_batch() {
        let err = softmax_xent(&Matrix::zeros(0, 2), &[]).unwrap_err();
        assert_eq!(err, Error::EmptyInput("softmax_xent batch"));
    }

    #[test]
    fn xent_gradient_matches_finite_differences() {
        let logits = mat(&[&[0.3, -0.8], &[1.4, 0.2], &[-0.5, -0.1]]);
        let labels = [true, false, true];
        let (_, grad) = softmax_xent(&logits, &labels).unwrap();
        let loss = |m: &Matrix| -> Result<f64> { Ok(softmax_xent(m, &labels)?.0) };
        let report = grad_check(loss, &grad, &logits, 1e-4).unwrap();
        assert!(report.max_rel_error < 1e-5, "rel err {}", report.max_rel_error);
    }
}
