use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Softmax with max subtraction.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let m = max_of(v);
    let e: Vec<f64> = v.iter().map(|&x| math::exp(x - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `v - logsumexp(v)`.
pub fn log_softmax(v: &[f64]) -> Vec<f64> {
    let m = max_of(v);
    let lse = m + math::ln(v.iter().map(|&x| math::exp(x - m)).sum::<f64>());
    v.iter().map(|&x| x - lse).collect()
}

pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        out.row_mut(i).copy_from_slice(&softmax(m.row(i)));
    }
    out
}

pub fn log_softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        out.row_mut(i).copy_from_slice(&log_softmax(m.row(i)));
    }
    out
}

/// Mean negative log-likelihood of `targets` under `log_softmax(logits)`,
/// with its gradient `(softmax - one_hot) / batch`.
pub fn cross_entropy(logits: &Matrix, targets: &[usize]) -> Result<(f64, Matrix)> {
    let b = logits.rows();
    if b == 0 {
        return Err(Error::EmptyBatch("cross_entropy"));
    }
    if targets.len() != b {
        return Err(Error::Shape {
            op: "cross_entropy",
            expected: (b, logits.cols()),
            found: (targets.len(), logits.cols()),
        });
    }
    if let Some(&label) = targets.iter().find(|&&t| t >= logits.cols()) {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: logits.cols(),
        });
    }
    let inv_b = 1.0 / b as f64;
    let mut grad = Matrix::zeros(b, logits.cols());
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let lp = log_softmax(logits.row(i));
        loss -= lp[t];
        let g = grad.row_mut(i);
        for (gc, &l) in g.iter_mut().zip(&lp) {
            *gc = math::exp(l) * inv_b;
        }
        g[t] -= inv_b;
    }
    Ok((loss * inv_b, grad))
}
