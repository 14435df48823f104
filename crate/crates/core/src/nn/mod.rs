//! Dense numerics: MLPs, activations, losses, Adam and gradient checking.

mod activation;
mod adam;
mod gradcheck;
mod loss;
mod mlp;

pub use activation::Activation;
pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradcheck, GradCheckReport, FD_STEP};
pub use loss::{cross_entropy, log_softmax, log_softmax_rows, softmax, softmax_rows};
pub use mlp::{BatchNormParams, Dense, ForwardTrace, Mlp, MlpArch, MlpConfig, MlpParams, BN_EPS, BN_MOMENTUM};

use alloc::vec::Vec;

use crate::matrix::Matrix;

/// Whether a forward pass records what backward needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A model's trainable tensors, visited in a fixed order. Gradients use the
/// same type so optimizers and gradient checks can pair them up entry by entry.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn zeros_like(&self) -> Self
    where
        Self: Sized + Clone,
    {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// `self += other`, entry by entry.
    fn accumulate(&mut self, other: &Self)
    where
        Self: Sized,
    {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0, |m, x| f64::max(m, x.abs()))
    }
}

impl Parameters for Matrix {
    fn tensors(&self) -> Vec<&[f64]> {
        alloc::vec![self.data()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        alloc::vec![self.data_mut()]
    }
}

impl Parameters for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        alloc::vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        alloc::vec![self.as_mut_slice()]
    }
}
