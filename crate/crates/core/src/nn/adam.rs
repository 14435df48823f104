//! Adam with decoupled weight decay.

use alloc::vec::Vec;

use super::Parameters;
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators, laid out like the parameter tensors they track.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new<P: Parameters>(config: AdamConfig, params: &P) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| alloc::vec![0.0; t.len()]).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update: `p *= 1 - lr·wd`, then the bias-corrected Adam step.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let c = self.config;
        let t = self.step as f64;
        let bc1 = 1.0 - math::powf(c.beta1, t);
        let bc2 = 1.0 - math::powf(c.beta2, t);
        let decay = 1.0 - c.lr * c.weight_decay;
        let grads = grads.tensors();
        for (k, p) in params.tensors_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], grads[k]);
            for i in 0..p.len() {
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] = p[i] * decay - c.lr * mhat / (math::sqrt(vhat) + c.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = Matrix::new(1, 3, alloc::vec![1.0, -2.0, 0.5]).unwrap();
        let g = Matrix::new(1, 3, alloc::vec![0.3, -4.0, 1e-3]).unwrap();
        let before = p.clone();
        let mut s = AdamState::new(AdamConfig::new(0.01, 0.0), &p);
        s.step(&mut p, &g);
        for i in 0..3 {
            let delta = p.data()[i] - before.data()[i];
            let expect = -0.01 * g.data()[i].signum();
            assert!((delta - expect).abs() < 1e-7, "{delta} vs {expect}");
        }
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn zero_lr_and_zero_grads_are_identity() {
        let start = Matrix::from_fn(2, 2, |i, j| i as f64 - j as f64 * 0.3);
        let mut p = start.clone();
        let g = Matrix::from_fn(2, 2, |_, _| 1.0);
        let mut s = AdamState::new(AdamConfig::new(0.0, 0.5), &p);
        s.step(&mut p, &g);
        assert_eq!(p, start);
        let mut s = AdamState::new(AdamConfig::new(0.1, 0.0), &p);
        for _ in 0..5 {
            s.step(&mut p, &Matrix::zeros(2, 2));
        }
        assert_eq!(p, start);
    }

    #[test]
    fn weight_decay_is_decoupled() {
        let mut p = alloc::vec![2.0];
        let mut s = AdamState::new(AdamConfig::new(0.1, 0.5), &p);
        s.step(&mut p, &alloc::vec![0.0]);
        assert!((p[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }
}
