//! Label diffusion `Y ← α Â Y + (1 − α) G`, the residual-error iteration and
//! Correct & Smooth. No randomness anywhere in this module.

use alloc::vec::Vec;

use crate::adjacency::{NormSpec, NormalizedAdjacency};
use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::matrix::{LabelMatrix, Matrix};

/// Early-exit threshold on the ∞-norm of one step's change.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffusionKind {
    /// Diffuse clamped one-hot training labels.
    Zeros,
    /// Correct & Smooth over base-model predictions.
    Residual,
}

impl DiffusionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiffusionKind::Zeros => "zeros",
            DiffusionKind::Residual => "residual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zeros" => Some(DiffusionKind::Zeros),
            "residual" => Some(DiffusionKind::Residual),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionConfig {
    pub kind: DiffusionKind,
    pub alpha: f64,
    pub num_propagations: usize,
    pub autoscale: bool,
    pub norm: NormSpec,
    /// Layers of the base MLP feeding the residual variant.
    pub num_mlp_layers: usize,
    pub tol: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            kind: DiffusionKind::Residual,
            alpha: 0.75,
            num_propagations: 20,
            autoscale: true,
            norm: NormSpec::GCN,
            num_mlp_layers: 2,
            tol: DEFAULT_TOL,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(alloc::format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if self.num_mlp_layers == 0 {
            return Err(Error::InvalidConfig("num_mlp_layers must be positive".into()));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(alloc::format!("alpha must lie in [0, 1), got {alpha}")))
    }
}

/// Runs `Y ← α Â Y + (1 − α) G` from `y0` for at most `max_steps` steps,
/// stopping once a step changes no entry by more than `tol`. Returns the
/// iterate and the number of steps taken.
pub fn lp_iterate_until(
    a: &NormalizedAdjacency,
    y0: &LabelMatrix,
    g: &LabelMatrix,
    alpha: f64,
    max_steps: usize,
    tol: f64,
) -> Result<(LabelMatrix, usize)> {
    check_alpha(alpha)?;
    if y0.shape() != g.shape() {
        return Err(Error::Shape {
            op: "lp_iterate",
            expected: g.shape(),
            found: y0.shape(),
        });
    }
    let mut y = y0.clone();
    for step in 1..=max_steps {
        let mut next = a.spmm(&y)?;
        next.axpby(alpha, 1.0 - alpha, g)?;
        let change = next.max_abs_diff(&y);
        y = next;
        if change <= tol {
            return Ok((y, step));
        }
    }
    Ok((y, max_steps))
}

/// [`lp_iterate_until`] with [`DEFAULT_TOL`].
pub fn lp_iterate(a: &NormalizedAdjacency, y0: &LabelMatrix, g: &LabelMatrix, alpha: f64, k: usize) -> Result<LabelMatrix> {
    Ok(lp_iterate_until(a, y0, g, alpha, k, DEFAULT_TOL)?.0)
}

fn check_labels(num_nodes: usize, labels: &LabelVector, train: &[usize]) -> Result<()> {
    if labels.len() != num_nodes {
        return Err(Error::Shape {
            op: "label propagation",
            expected: (num_nodes, labels.num_classes()),
            found: (labels.len(), labels.num_classes()),
        });
    }
    if let Some(&v) = train.iter().find(|&&v| v >= num_nodes) {
        return Err(Error::NodeOutOfRange { node: v, num_nodes });
    }
    Ok(())
}

/// Diffusion source of the zeros variant: one-hot rows on `train`, zero
/// elsewhere. The starting iterate equals the source.
pub fn build_zeros_source(labels: &LabelVector, train: &[usize]) -> Result<(LabelMatrix, LabelMatrix)> {
    if train.is_empty() {
        return Err(Error::EmptyBatch("build_zeros_source"));
    }
    check_labels(labels.len(), labels, train)?;
    let mut g = Matrix::zeros(labels.len(), labels.num_classes());
    for &v in train {
        g.set(v, labels.get(v), 1.0);
    }
    Ok((g.clone(), g))
}

/// `E = Ŷ − Z` on training rows, zero elsewhere.
pub fn residual_errors(z: &Matrix, labels: &LabelVector, train: &[usize]) -> Result<Matrix> {
    check_labels(z.rows(), labels, train)?;
    if z.cols() != labels.num_classes() {
        return Err(Error::Shape {
            op: "residual_errors",
            expected: (z.rows(), labels.num_classes()),
            found: z.shape(),
        });
    }
    let mut e = Matrix::zeros(z.rows(), z.cols());
    for &v in train {
        let row = e.row_mut(v);
        for (c, (o, &p)) in row.iter_mut().zip(z.row(v)).enumerate() {
            *o = if c == labels.get(v) { 1.0 } else { 0.0 } - p;
        }
    }
    Ok(e)
}

/// Smooths training errors with `E ← (1 − α) E₀ + α Â E` for `t` steps.
pub fn residual_error_iterate(
    a: &NormalizedAdjacency,
    z: &Matrix,
    labels: &LabelVector,
    train: &[usize],
    alpha: f64,
    t: usize,
    tol: f64,
) -> Result<Matrix> {
    let e = residual_errors(z, labels, train)?;
    Ok(lp_iterate_until(a, &e, &e, alpha, t, tol)?.0)
}

/// Rescales every non-training error row to the mean L1 norm of the
/// training rows of `e_train`. Training rows and zero rows are kept.
pub fn autoscale(e_hat: &Matrix, e_train: &Matrix, train: &[usize]) -> Matrix {
    let l1 = |r: &[f64]| r.iter().map(|x| x.abs()).sum::<f64>();
    let target = if train.is_empty() {
        0.0
    } else {
        train.iter().map(|&v| l1(e_train.row(v))).sum::<f64>() / train.len() as f64
    };
    let mut is_train = alloc::vec![false; e_hat.rows()];
    for &v in train {
        is_train[v] = true;
    }
    let mut out = e_hat.clone();
    for (i, &t) in is_train.iter().enumerate() {
        let n = l1(e_hat.row(i));
        if !t && n > 0.0 {
            for x in out.row_mut(i) {
                *x *= target / n;
            }
        }
    }
    out
}

/// Parameters of both Correct & Smooth phases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsConfig {
    pub correct_alpha: f64,
    pub correct_steps: usize,
    pub smooth_alpha: f64,
    pub smooth_steps: usize,
    pub autoscale: bool,
    pub tol: f64,
}

impl CsConfig {
    /// Both phases share the diffusion's `alpha` and step count.
    pub fn from_diffusion(c: &DiffusionConfig) -> Self {
        Self {
            correct_alpha: c.alpha,
            correct_steps: c.num_propagations,
            smooth_alpha: c.alpha,
            smooth_steps: c.num_propagations,
            autoscale: c.autoscale,
            tol: c.tol,
        }
    }
}

/// Corrects base predictions `z` by diffused training errors, then smooths
/// the corrected scores with training rows clamped to their labels.
pub fn correct_and_smooth(
    a: &NormalizedAdjacency,
    z: &Matrix,
    labels: &LabelVector,
    train: &[usize],
    config: &CsConfig,
) -> Result<Matrix> {
    let e = residual_errors(z, labels, train)?;
    let mut e_hat = lp_iterate_until(a, &e, &e, config.correct_alpha, config.correct_steps, config.tol)?.0;
    if config.autoscale {
        e_hat = autoscale(&e_hat, &e, train);
    }
    let mut corrected = z.clone();
    corrected.add_assign(&e_hat)?;
    for &v in train {
        let c = labels.get(v);
        for (j, x) in corrected.row_mut(v).iter_mut().enumerate() {
            *x = if j == c { 1.0 } else { 0.0 };
        }
    }
    Ok(lp_iterate_until(a, &corrected, &corrected, config.smooth_alpha, config.smooth_steps, config.tol)?.0)
}

/// Zeros-variant label propagation scores for every node.
pub fn zeros_propagation(a: &NormalizedAdjacency, labels: &LabelVector, train: &[usize], config: &DiffusionConfig) -> Result<Matrix> {
    config.validate()?;
    let (g, y0) = build_zeros_source(labels, train)?;
    Ok(lp_iterate_until(a, &y0, &g, config.alpha, config.num_propagations, config.tol)?.0)
}

/// Rows of `train` as a membership list, used by callers that only hold a
/// mask.
pub fn nodes_of(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Solves `M X = B` by Gaussian elimination with partial pivoting.
    pub fn solve(m: &Matrix, b: &Matrix) -> Matrix {
        let n = m.rows();
        let mut a = m.clone();
        let mut x = b.clone();
        for col in 0..n {
            let p = (col..n)
                .max_by(|&i, &j| a.get(i, col).abs().total_cmp(&a.get(j, col).abs()))
                .unwrap();
            for j in 0..n {
                let (u, v) = (a.get(col, j), a.get(p, j));
                a.set(col, j, v);
                a.set(p, j, u);
            }
            for j in 0..x.cols() {
                let (u, v) = (x.get(col, j), x.get(p, j));
                x.set(col, j, v);
                x.set(p, j, u);
            }
            let d = a.get(col, col);
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a.get(i, col) / d;
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.set(i, j, a.get(i, j) - f * a.get(col, j));
                }
                for j in 0..x.cols() {
                    x.set(i, j, x.get(i, j) - f * x.get(col, j));
                }
            }
        }
        for i in 0..n {
            let d = a.get(i, i);
            for v in x.row_mut(i) {
                *v /= d;
            }
        }
        x
    }

    /// `(1 − α)(I − αÂ)⁻¹ G`.
    pub fn fixed_point(a: &NormalizedAdjacency, g: &Matrix, alpha: f64) -> Matrix {
        let n = a.num_nodes();
        let d = a.to_dense();
        let m = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - alpha * d.get(i, j));
        let mut y = solve(&m, g);
        y.scale(1.0 - alpha);
        y
    }
}
