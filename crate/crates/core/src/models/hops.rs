//! Propagated feature stacks `X⁰ .. X^K`.

use alloc::vec::Vec;

use crate::adjacency::{NormSpec, NormalizedAdjacency};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::meter::StorageMeter;

/// `hops[l] = Â^l X`, all of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct HopFeatures {
    hops: Vec<Matrix>,
    norm: NormSpec,
}

impl HopFeatures {
    /// Wraps an existing stack, for example one loaded from disk.
    pub fn from_hops(hops: Vec<Matrix>, norm: NormSpec) -> Result<Self> {
        let first = hops.first().ok_or(Error::InvalidConfig("hop stack is empty".into()))?;
        if let Some(h) = hops.iter().find(|h| h.shape() != first.shape()) {
            return Err(Error::Shape {
                op: "HopFeatures::from_hops",
                expected: first.shape(),
                found: h.shape(),
            });
        }
        Ok(Self { hops, norm })
    }

    /// Largest hop index.
    pub fn k(&self) -> usize {
        self.hops.len() - 1
    }

    pub fn norm(&self) -> NormSpec {
        self.norm
    }

    pub fn hop(&self, l: usize) -> &Matrix {
        &self.hops[l]
    }

    pub fn hops(&self) -> &[Matrix] {
        &self.hops
    }

    pub fn into_hops(self) -> Vec<Matrix> {
        self.hops
    }

    pub fn num_rows(&self) -> usize {
        self.hops[0].rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.hops[0].cols()
    }

    /// Rows `nodes` of hops `range`, in order.
    pub fn gather(&self, range: core::ops::RangeInclusive<usize>, nodes: &[usize]) -> Vec<Matrix> {
        self.hops[range].iter().map(|h| h.gather_rows(nodes)).collect()
    }

    pub fn bytes(&self) -> usize {
        self.hops.iter().map(Matrix::bytes).sum()
    }
}

/// `X^l = Â X^{l-1}` for `l = 1..=k`. When a meter is given, every stored
/// hop is charged to it.
pub fn precompute_hops(
    a: &NormalizedAdjacency,
    x: &Matrix,
    k: usize,
    meter: Option<&mut StorageMeter>,
) -> Result<HopFeatures> {
    let mut hops = Vec::with_capacity(k + 1);
    hops.push(x.clone());
    for l in 1..=k {
        let next = a.spmm(&hops[l - 1])?;
        hops.push(next);
    }
    if let Some(m) = meter {
        for h in &hops {
            m.acquire(h.bytes());
        }
    }
    HopFeatures::from_hops(hops, a.spec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::NormKind;
    use crate::graph::Graph;

    fn x() -> Matrix {
        Matrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * (j as f64 + 1.0))
    }

    #[test]
    fn zero_hops_and_identity() {
        let a = NormalizedAdjacency::identity(4);
        let h = precompute_hops(&a, &x(), 0, None).unwrap();
        assert_eq!(h.hops(), &[x()]);
        let h = precompute_hops(&a, &x(), 3, None).unwrap();
        assert!(h.hops().iter().all(|m| *m == x()));
    }

    #[test]
    fn two_hops_match_repeated_products() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 4, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Sym, true);
        let mut meter = StorageMeter::new();
        let h = precompute_hops(&a, &x(), 2, Some(&mut meter)).unwrap();
        let d = a.to_dense();
        let oracle = d.matmul(&d.matmul(&x()).unwrap()).unwrap();
        assert!(h.hop(2).max_abs_diff(&oracle) < 1e-12);
        assert_eq!(meter.high_water(), 3 * x().bytes());
        assert_eq!(h.k(), 2);
    }

    #[test]
    fn mismatched_stacks_are_rejected() {
        assert!(HopFeatures::from_hops(Vec::new(), NormSpec::GCN).is_err());
        assert!(HopFeatures::from_hops(alloc::vec![x(), Matrix::zeros(4, 2)], NormSpec::GCN).is_err());
    }
}
