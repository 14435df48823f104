//! Normalized adjacency operators and sparse-dense products.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math;
use crate::matrix::Matrix;

/// Adjacency normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormKind {
    /// `D^{-1/2} A D^{-1/2}`
    Sym,
    /// `D^{-1} A`
    Row,
    /// `A D^{-1}`
    Col,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::Row, NormKind::Col, NormKind::Sym];

    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::Sym => "sym",
            NormKind::Row => "row",
            NormKind::Col => "col",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sym" | "D^-1/2AD^-1/2" => Some(NormKind::Sym),
            "row" | "D^-1A" => Some(NormKind::Row),
            "col" | "AD^-1" => Some(NormKind::Col),
            _ => None,
        }
    }
}

/// A normalization recipe: kind plus whether self-loops are added first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NormSpec {
    pub kind: NormKind,
    pub self_loops: bool,
}

impl NormSpec {
    pub const GCN: NormSpec = NormSpec {
        kind: NormKind::Sym,
        self_loops: true,
    };

    pub fn apply(&self, g: &Graph) -> NormalizedAdjacency {
        NormalizedAdjacency::new(g, self.kind, self.self_loops)
    }
}

/// A graph with per-entry weights from a normalization. Values are aligned
/// with the structure's `col_indices`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency {
    structure: Graph,
    values: Vec<f64>,
    kind: NormKind,
    self_loops_added: bool,
}

impl NormalizedAdjacency {
    /// Normalizes `g`. Rows (or columns) of isolated nodes are all zero.
    pub fn new(g: &Graph, kind: NormKind, with_self_loops: bool) -> Self {
        let structure = if with_self_loops { g.add_self_loops() } else { g.clone() };
        let n = structure.num_nodes();
        let out_deg: Vec<f64> = (0..n).map(|v| structure.degree(v) as f64).collect();
        let mut in_deg = vec![0.0; n];
        for &c in structure.col_indices() {
            in_deg[c] += 1.0;
        }
        let inv = |d: f64| if d > 0.0 { 1.0 / d } else { 0.0 };
        let values = structure
            .edges()
            .map(|(u, v)| match kind {
                NormKind::Row => inv(out_deg[u]),
                NormKind::Col => inv(in_deg[v]),
                NormKind::Sym => math::sqrt(inv(out_deg[u] * in_deg[v])),
            })
            .collect();
        Self {
            structure,
            values,
            kind,
            self_loops_added: with_self_loops,
        }
    }

    /// The `n × n` identity operator.
    pub fn identity(n: usize) -> Self {
        let structure = Graph::empty(n).add_self_loops();
        Self {
            values: vec![1.0; n],
            structure,
            kind: NormKind::Row,
            self_loops_added: true,
        }
    }

    #[inline]
    pub fn structure(&self) -> &Graph {
        &self.structure
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.structure.num_nodes()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn kind(&self) -> NormKind {
        self.kind
    }

    #[inline]
    pub fn self_loops_added(&self) -> bool {
        self.self_loops_added
    }

    pub fn spec(&self) -> NormSpec {
        NormSpec {
            kind: self.kind,
            self_loops: self.self_loops_added,
        }
    }

    /// Neighbor ids and weights of row `u`.
    #[inline]
    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let off = self.structure.row_offsets();
        let (a, b) = (off[u], off[u + 1]);
        (&self.structure.col_indices()[a..b], &self.values[a..b])
    }

    /// Weight of `(u, v)`, zero when the entry is not stored.
    pub fn value(&self, u: usize, v: usize) -> f64 {
        self.structure
            .edge_index(u, v)
            .map_or(0.0, |k| self.values[k])
    }

    /// Squared Euclidean norm of every row.
    pub fn row_sq_norms(&self) -> Vec<f64> {
        (0..self.num_nodes())
            .map(|u| self.row(u).1.iter().map(|w| w * w).sum())
            .collect()
    }

    /// Squared Euclidean norm of every column.
    pub fn col_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for (&c, &w) in self.structure.col_indices().iter().zip(&self.values) {
            out[c] += w * w;
        }
        out
    }

    /// Dense copy, intended for oracles and small graphs.
    pub fn to_dense(&self) -> Matrix {
        let n = self.num_nodes();
        let mut m = Matrix::zeros(n, n);
        for u in 0..n {
            let (cols, vals) = self.row(u);
            for (&v, &w) in cols.iter().zip(vals) {
                m.set(u, v, w);
            }
        }
        m
    }

    /// Sparse-dense product `Â · x`.
    ///
    /// Each output row is reduced in CSR order by exactly one worker, so the
    /// result does not depend on the thread count.
    pub fn spmm(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.num_nodes() {
            return Err(Error::Shape {
                op: "spmm",
                expected: (self.num_nodes(), x.cols()),
                found: x.shape(),
            });
        }
        let cols = x.cols();
        let mut out = Matrix::zeros(self.num_nodes(), cols);
        if cols == 0 {
            return Ok(out);
        }
        let row_kernel = |u: usize, out_row: &mut [f64]| {
            let (nbrs, vals) = self.row(u);
            for (&v, &w) in nbrs.iter().zip(vals) {
                for (o, &xv) in out_row.iter_mut().zip(x.row(v)) {
                    *o += w * xv;
                }
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.data_mut()
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(u, r)| row_kernel(u, r));
        }
        #[cfg(not(feature = "parallel"))]
        {
            for (u, r) in out.data_mut().chunks_mut(cols).enumerate() {
                row_kernel(u, r);
            }
        }
        Ok(out)
    }

    /// `Âᵀ · x`, used for gradients through a propagation.
    pub fn spmm_transpose(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.num_nodes() {
            return Err(Error::Shape {
                op: "spmm_transpose",
                expected: (self.num_nodes(), x.cols()),
                found: x.shape(),
            });
        }
        let mut out = Matrix::zeros(self.num_nodes(), x.cols());
        for u in 0..self.num_nodes() {
            let (nbrs, vals) = self.row(u);
            let src = x.row(u);
            for (&v, &w) in nbrs.iter().zip(vals) {
                for (o, &s) in out.row_mut(v).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn edge() -> Graph {
        Graph::from_edges(&[(0, 1)], 2, true).unwrap()
    }

    fn star() -> Graph {
        Graph::from_edges(&[(0, 1), (0, 2), (0, 3)], 4, true).unwrap()
    }

    #[test]
    fn two_node_sym_with_self_loops_is_one_half() {
        let a = NormalizedAdjacency::new(&edge(), NormKind::Sym, true);
        assert_eq!(a.values().len(), 4);
        assert!(a.values().iter().all(|&w| (w - 0.5).abs() < 1e-15));
    }

    #[test]
    fn edgeless_row_norm_with_loops_is_identity() {
        let a = NormalizedAdjacency::new(&Graph::empty(4), NormKind::Row, true);
        assert_eq!(a.to_dense(), Matrix::identity(4));
    }

    #[test]
    fn star_row_norm() {
        let a = NormalizedAdjacency::new(&star(), NormKind::Row, false);
        let (_, vals) = a.row(0);
        assert!(vals.iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));
        let (_, leaf) = a.row(1);
        assert_eq!(leaf, &[1.0]);
    }

    #[test]
    fn isolated_nodes_give_zero_rows() {
        let g = Graph::from_edges(&[(0, 1)], 3, true).unwrap();
        for kind in NormKind::ALL {
            let a = NormalizedAdjacency::new(&g, kind, false);
            let y = a.spmm(&Matrix::from_fn(3, 2, |i, j| (i + j + 1) as f64)).unwrap();
            assert_eq!(y.row(2), &[0.0, 0.0]);
            assert!(y.is_finite());
        }
    }

    #[test]
    fn spmm_cases() {
        let x = Matrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.25);
        assert_eq!(NormalizedAdjacency::identity(5).spmm(&x).unwrap(), x);

        let a = NormalizedAdjacency::new(&edge(), NormKind::Sym, true);
        let y = a.spmm(&Matrix::identity(2)).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5, 0.5, 0.5]);

        assert!(a.spmm(&Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn transpose_product_matches_dense() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 0), (2, 3)], 4, false).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Row, true);
        let x = Matrix::from_fn(4, 2, |i, j| i as f64 - j as f64 * 0.5);
        let dense = a.to_dense().t_matmul(&x).unwrap();
        assert!(a.spmm_transpose(&x).unwrap().max_abs_diff(&dense) < 1e-14);
    }

    fn random_graph(n: usize, p: f64, seed: u64, sym: bool) -> Graph {
        let mut r = rng::stream(seed, 0);
        let mut e = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && r.random::<f64>() < p {
                    e.push((u, v));
                }
            }
        }
        Graph::from_edges(&e, n, sym).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn row_and_col_sums(n in 1usize..40, p in 0.0f64..0.3, seed in any::<u64>(), loops in any::<bool>()) {
            let g = random_graph(n, p, seed, false);
            let row = NormalizedAdjacency::new(&g, NormKind::Row, loops).to_dense();
            for i in 0..n {
                let s: f64 = row.row(i).iter().sum();
                prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
            }
            let col = NormalizedAdjacency::new(&g, NormKind::Col, loops).to_dense();
            for (j, s) in col.column_sums().into_iter().enumerate() {
                prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-9, "col {} sums to {}", j, s);
            }
        }

        #[test]
        fn sym_norm_is_symmetric(n in 1usize..40, p in 0.0f64..0.3, seed in any::<u64>(), loops in any::<bool>()) {
            let g = random_graph(n, p, seed, true);
            let a = NormalizedAdjacency::new(&g, NormKind::Sym, loops);
            for (u, v) in a.structure().edges() {
                prop_assert_eq!(a.value(u, v), a.value(v, u));
            }
        }
    }
}
