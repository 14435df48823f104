//! An MLP on a single propagated hop. With one layer on hop `K` this is SGC;
//! on hop 0 it is the feature-only baseline.

use core::ops::RangeInclusive;

use rand::Rng;

use super::HopModel;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::nn::{ForwardTrace, Mlp, MlpConfig, MlpParams};

#[derive(Clone, Debug, PartialEq)]
pub struct HopMlp {
    k: usize,
    linear: Mlp,
}

/// SGC is a single linear layer on hop `K`.
pub type Sgc = HopMlp;

impl HopMlp {
    /// SGC: one linear layer on hop `k`.
    pub fn new(feature_dim: usize, num_classes: usize, k: usize, seed: u64) -> Result<Self> {
        Self::with_config(MlpConfig::new(alloc::vec![feature_dim, num_classes], seed), k)
    }

    /// An arbitrary MLP reading hop `k`.
    pub fn with_config(config: MlpConfig, k: usize) -> Result<Self> {
        Ok(Self {
            k,
            linear: Mlp::new(config)?,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mlp(&self) -> &Mlp {
        &self.linear
    }
}

impl HopModel for HopMlp {
    type Params = MlpParams;
    type Trace = ForwardTrace;

    fn hop_range(&self) -> RangeInclusive<usize> {
        self.k..=self.k
    }

    fn params(&self) -> &MlpParams {
        &self.linear.params
    }

    fn params_mut(&mut self) -> &mut MlpParams {
        &mut self.linear.params
    }

    fn forward_train<R: Rng + ?Sized>(&self, hops: &[Matrix], rng: &mut R) -> Result<(Matrix, ForwardTrace)> {
        self.linear.forward_train(&hops[0], rng)
    }

    fn forward_eval(&self, hops: &[Matrix]) -> Result<Matrix> {
        self.linear.forward_eval(&hops[0])
    }

    fn update_running_stats(&mut self, trace: &ForwardTrace) {
        self.linear.update_running_stats(trace);
    }

    fn backward(&self, trace: &ForwardTrace, grad_logits: &Matrix) -> Result<MlpParams> {
        Ok(self.linear.backward(trace, grad_logits)?.0)
    }

    fn activation_bytes(trace: &ForwardTrace) -> usize {
        trace.activation_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{check_model, random_matrix};
    use super::super::{precompute_hops, HopFeatures};
    use super::*;
    use crate::adjacency::{NormKind, NormalizedAdjacency};
    use crate::graph::Graph;
    use crate::rng;

    #[test]
    fn identity_weights_return_last_hop() {
        let mut m = Sgc::new(3, 3, 2, 0).unwrap();
        m.params_mut().layers[0].weight = Matrix::identity(3);
        let x = random_matrix(5, 3, 1);
        assert_eq!(m.forward_eval(&[x.clone()]).unwrap(), x);
        assert_eq!(m.hop_range(), 2..=2);
        assert_eq!(Sgc::new(3, 3, 0, 0).unwrap().hop_range(), 0..=0);
    }

    #[test]
    fn precompute_then_sgc_equals_repeated_propagation() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)], 5, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Sym, true);
        let x = random_matrix(5, 4, 2);
        let hops: HopFeatures = precompute_hops(&a, &x, 3, None).unwrap();
        let m = Sgc::new(4, 3, 3, 9).unwrap();
        let all: alloc::vec::Vec<usize> = (0..5).collect();
        let via_hops = m.forward_eval(&hops.gather(m.hop_range(), &all)).unwrap();
        let mut h = x.clone();
        for _ in 0..3 {
            h = a.spmm(&h).unwrap();
        }
        let direct = m.forward_eval(&[h]).unwrap();
        assert!(via_hops.max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn sgc_gradients_and_activation_bytes() {
        let m = Sgc::new(4, 3, 1, 5).unwrap();
        let x = random_matrix(7, 4, 3);
        let report = check_model(&m, &[x.clone()], &[0, 1, 2, 0, 1, 2, 0]);
        assert!(report.max_rel_error < 1e-6, "{report:?}");
        let (_, trace) = m.forward_train(&[x], &mut rng::stream(0, 0)).unwrap();
        assert_eq!(Sgc::activation_bytes(&trace), 0);
    }
}
