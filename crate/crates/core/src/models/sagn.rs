//! SAGN: per-node attention over propagated hops, a linear skip from the
//! raw features, and an MLP head.
//!
//! For node `i`: `s_k = leaky(u·X⁰_i + v_k·X^k_i)`, `T_i = softmax_k(s)`
//! over `k = 1..K`, `h_i = Σ_k T_i^k X^k_i + X⁰_i Θ_r`, logits `= MLP(h)`.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use super::HopModel;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::nn::{softmax, Activation, ForwardTrace, MlpArch, MlpConfig, MlpParams, Parameters};
use crate::rng;

pub const SAGN_ATTENTION_SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct SagnConfig {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub k: usize,
    pub hidden: usize,
    /// Layers of the head MLP.
    pub num_layers: usize,
    pub dropout: f64,
    pub batchnorm: bool,
    pub seed: u64,
}

impl SagnConfig {
    pub fn new(feature_dim: usize, num_classes: usize, k: usize, hidden: usize, seed: u64) -> Self {
        Self {
            feature_dim,
            num_classes,
            k,
            hidden,
            num_layers: 2,
            dropout: 0.0,
            batchnorm: false,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SagnParams {
    /// Attention vector applied to `X⁰`.
    pub u: Vec<f64>,
    /// Row `k - 1` is the attention vector of hop `k`.
    pub v: Matrix,
    /// `Θ_r`, `d × d`.
    pub skip: Matrix,
    pub head: MlpParams,
}

impl Parameters for SagnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = alloc::vec![self.u.as_slice(), self.v.data(), self.skip.data()];
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = alloc::vec![self.u.as_mut_slice(), self.v.data_mut(), self.skip.data_mut()];
        t.extend(self.head.tensors_mut());
        t
    }
}

#[derive(Clone, Debug)]
pub struct SagnTrace {
    inputs: Vec<Matrix>,
    /// Raw scores before the leaky ReLU, `batch × K`.
    scores: Matrix,
    attention: Matrix,
    fused_bytes: usize,
    head: ForwardTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sagn {
    config: SagnConfig,
    head: MlpArch,
    params: SagnParams,
}

impl Sagn {
    pub fn new(config: SagnConfig) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::NoHops);
        }
        let d = config.feature_dim;
        let head_config = MlpConfig::with_depth(d, config.hidden, config.num_classes, config.num_layers, rng::child_seed(config.seed, 1))
            .dropout(config.dropout)
            .batchnorm(config.batchnorm);
        let (head, head_params) = MlpArch::new(head_config)?;
        let mut r = rng::stream(config.seed, rng::streams::INIT);
        let bound = math::sqrt(1.0 / d as f64);
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let u = (0..d).map(|_| dist.sample(&mut r)).collect();
        let v = Matrix::from_fn(config.k, d, |_, _| dist.sample(&mut r));
        let skip = Matrix::from_fn(d, d, |_, _| dist.sample(&mut r));
        Ok(Self {
            config,
            head,
            params: SagnParams { u, v, skip, head: head_params },
        })
    }

    pub fn config(&self) -> &SagnConfig {
        &self.config
    }

    fn check_hops(&self, hops: &[Matrix]) -> Result<()> {
        if hops.len() != self.config.k + 1 {
            return Err(Error::InvalidConfig(alloc::format!(
                "SAGN expects {} hops, got {}",
                self.config.k + 1,
                hops.len()
            )));
        }
        for h in hops {
            if h.shape() != hops[0].shape() || h.cols() != self.config.feature_dim {
                return Err(Error::Shape {
                    op: "Sagn::forward",
                    expected: (hops[0].rows(), self.config.feature_dim),
                    found: h.shape(),
                });
            }
        }
        Ok(())
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Raw scores and attention weights, both `batch × K`.
    fn attend(&self, hops: &[Matrix]) -> (Matrix, Matrix) {
        let (b, k) = (hops[0].rows(), self.config.k);
        let p = &self.params;
        let mut scores = Matrix::zeros(b, k);
        let mut attention = Matrix::zeros(b, k);
        let leaky = Activation::LeakyRelu(SAGN_ATTENTION_SLOPE);
        for i in 0..b {
            let base = Self::dot(&p.u, hops[0].row(i));
            let mut act = Vec::with_capacity(k);
            for hop in 1..=k {
                let s = base + Self::dot(p.v.row(hop - 1), hops[hop].row(i));
                scores.set(i, hop - 1, s);
                act.push(leaky.apply(s));
            }
            attention.row_mut(i).copy_from_slice(&softmax(&act));
        }
        (scores, attention)
    }

    /// Attention weights over hops `1..=K`, one row per node.
    pub fn attention(&self, hops: &[Matrix]) -> Result<Matrix> {
        self.check_hops(hops)?;
        Ok(self.attend(hops).1)
    }

    /// Head input `Σ_k T^k X^k + X⁰ Θ_r`.
    fn fuse(&self, hops: &[Matrix], attention: &Matrix) -> Result<Matrix> {
        let mut h = hops[0].matmul(&self.params.skip)?;
        for i in 0..h.rows() {
            let row = h.row_mut(i);
            for hop in 1..=self.config.k {
                let t = attention.get(i, hop - 1);
                for (o, &x) in row.iter_mut().zip(hops[hop].row(i)) {
                    *o += t * x;
                }
            }
        }
        Ok(h)
    }
}

impl HopModel for Sagn {
    type Params = SagnParams;
    type Trace = SagnTrace;

    fn hop_range(&self) -> RangeInclusive<usize> {
        0..=self.config.k
    }

    fn params(&self) -> &SagnParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut SagnParams {
        &mut self.params
    }

    fn forward_train<R: Rng + ?Sized>(&self, hops: &[Matrix], rng: &mut R) -> Result<(Matrix, SagnTrace)> {
        self.check_hops(hops)?;
        let (scores, attention) = self.attend(hops);
        let fused = self.fuse(hops, &attention)?;
        let (logits, head) = self.head.forward_train(&self.params.head, &fused, rng)?;
        Ok((
            logits,
            SagnTrace {
                inputs: hops.to_vec(),
                scores,
                attention,
                fused_bytes: fused.bytes(),
                head,
            },
        ))
    }

    fn forward_eval(&self, hops: &[Matrix]) -> Result<Matrix> {
        self.check_hops(hops)?;
        let (_, attention) = self.attend(hops);
        let fused = self.fuse(hops, &attention)?;
        self.head.forward_eval(&self.params.head, &fused)
    }

    fn backward(&self, trace: &SagnTrace, grad_logits: &Matrix) -> Result<SagnParams> {
        let (head, g) = self.head.backward(&self.params.head, &trace.head, grad_logits)?;
        let hops = &trace.inputs;
        let (b, k, d) = (g.rows(), self.config.k, self.config.feature_dim);
        let mut u = alloc::vec![0.0; d];
        let mut v = Matrix::zeros(k, d);
        let skip = hops[0].t_matmul(&g)?;
        let leaky = Activation::LeakyRelu(SAGN_ATTENTION_SLOPE);
        let mut dt = alloc::vec![0.0; k];
        for i in 0..b {
            let gi = g.row(i);
            let t = trace.attention.row(i);
            for hop in 1..=k {
                dt[hop - 1] = Self::dot(gi, hops[hop].row(i));
            }
            let mean: f64 = t.iter().zip(&dt).map(|(a, b)| a * b).sum();
            for hop in 1..=k {
                let j = hop - 1;
                let ds = t[j] * (dt[j] - mean) * leaky.derivative(trace.scores.get(i, j));
                for (acc, &x) in u.iter_mut().zip(hops[0].row(i)) {
                    *acc += ds * x;
                }
                for (acc, &x) in v.row_mut(j).iter_mut().zip(hops[hop].row(i)) {
                    *acc += ds * x;
                }
            }
        }
        Ok(SagnParams { u, v, skip, head })
    }

    fn update_running_stats(&mut self, trace: &SagnTrace) {
        self.head.update_running_stats(&trace.head);
    }

    fn activation_bytes(trace: &SagnTrace) -> usize {
        trace.scores.bytes() + trace.attention.bytes() + trace.fused_bytes + trace.head.activation_bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::{check_model, jitter, random_matrix};
    use super::*;
    use proptest::prelude::*;

    fn stack(k: usize, rows: usize, d: usize, seed: u64) -> Vec<Matrix> {
        (0..=k).map(|l| random_matrix(rows, d, seed + l as u64)).collect()
    }

    #[test]
    fn zero_hops_are_rejected() {
        assert_eq!(Sagn::new(SagnConfig::new(3, 2, 0, 4, 0)).unwrap_err(), Error::NoHops);
    }

    #[test]
    fn single_hop_attention_is_one() {
        let m = Sagn::new(SagnConfig::new(3, 2, 1, 4, 0)).unwrap();
        let hops = stack(1, 5, 3, 1);
        let t = m.attention(&hops).unwrap();
        assert!(t.data().iter().all(|&w| w == 1.0));
        let fused = m.fuse(&hops, &t).unwrap();
        let mut expect = hops[0].matmul(&m.params().skip).unwrap();
        expect.add_assign(&hops[1]).unwrap();
        assert!(fused.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn zero_attention_vectors_average_the_hops() {
        let k = 3;
        let mut m = Sagn::new(SagnConfig::new(3, 2, k, 4, 0)).unwrap();
        m.params_mut().u.fill(0.0);
        m.params_mut().v = Matrix::zeros(k, 3);
        m.params_mut().skip = Matrix::zeros(3, 3);
        let hops = stack(k, 4, 3, 2);
        let t = m.attention(&hops).unwrap();
        assert!(t.data().iter().all(|&w| (w - 1.0 / k as f64).abs() < 1e-15));
        let fused = m.fuse(&hops, &t).unwrap();
        let mut mean = Matrix::zeros(4, 3);
        for h in &hops[1..] {
            mean.axpby(1.0, 1.0 / k as f64, h).unwrap();
        }
        assert!(fused.max_abs_diff(&mean) < 1e-15);
    }

    #[test]
    fn sagn_gradients_match_finite_differences() {
        for (k, layers, bn) in [(1, 1, false), (3, 2, false), (2, 3, true)] {
            let cfg = SagnConfig {
                num_layers: layers,
                batchnorm: bn,
                ..SagnConfig::new(4, 3, k, 5, 7)
            };
            let mut m = Sagn::new(cfg).unwrap();
            jitter(m.params_mut(), 40 + k as u64);
            let hops = stack(k, 7, 4, 30);
            let report = check_model(&m, &hops, &[0, 1, 2, 2, 1, 0, 1]);
            assert!(report.max_rel_error < 1e-5, "k={k}: {report:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn attention_rows_sum_to_one(k in 1usize..6, seed in any::<u64>()) {
            let m = Sagn::new(SagnConfig::new(3, 2, k, 4, seed)).unwrap();
            let t = m.attention(&stack(k, 6, 3, seed)).unwrap();
            for i in 0..t.rows() {
                prop_assert!((t.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn attention_ignores_shared_score_shift(k in 1usize..6, seed in any::<u64>(), c in -3.0f64..3.0) {
            let m = Sagn::new(SagnConfig::new(3, 2, k, 4, seed)).unwrap();
            let hops = stack(k, 6, 3, seed);
            let (scores, t) = m.attend(&hops);
            let leaky = Activation::LeakyRelu(SAGN_ATTENTION_SLOPE);
            for i in 0..t.rows() {
                let shifted: Vec<f64> = scores.row(i).iter().map(|&s| leaky.apply(s) + c).collect();
                for (a, b) in softmax(&shifted).iter().zip(t.row(i)) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
