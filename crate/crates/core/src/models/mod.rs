//! Models trained on precomputed hops, and the GNN trained on sampled plans.

mod hops;
mod sagn;
mod sampled_gnn;
mod sgc;
mod sign;

pub use hops::{precompute_hops, HopFeatures};
pub use sagn::{Sagn, SagnConfig, SagnParams, SAGN_ATTENTION_SLOPE};
pub use sampled_gnn::{GnnTrace, SampledGnn, SampledGnnConfig, SampledGnnParams, SageLayer};
pub use sgc::{HopMlp, Sgc};
pub use sign::{Sign, SignConfig, SignParams};

use core::ops::RangeInclusive;

use rand::Rng;

use crate::error::Result;
use crate::matrix::Matrix;
use crate::nn::Parameters;

/// A predictor over a batch of precomputed hop rows.
///
/// `hops` passed to the forward methods holds the batch rows of exactly the
/// hops in [`HopModel::hop_range`], in order.
pub trait HopModel {
    type Params: Parameters + Clone;
    type Trace;

    fn hop_range(&self) -> RangeInclusive<usize>;
    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;
    fn forward_train<R: Rng + ?Sized>(&self, hops: &[Matrix], rng: &mut R) -> Result<(Matrix, Self::Trace)>;
    fn forward_eval(&self, hops: &[Matrix]) -> Result<Matrix>;
    fn backward(&self, trace: &Self::Trace, grad_logits: &Matrix) -> Result<Self::Params>;
    /// Folds batch statistics into running estimates after a training step.
    fn update_running_stats(&mut self, _trace: &Self::Trace) {}
    /// Bytes of intermediates the trace keeps for backward.
    fn activation_bytes(trace: &Self::Trace) -> usize;
}
