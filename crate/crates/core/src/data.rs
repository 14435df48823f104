//! Labels, splits and the dataset bundle that ties them to a graph.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::{FeatureMatrix, Matrix};

/// Per-node class indices in `0..num_classes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        Ok(Self { labels, num_classes })
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> usize {
        self.labels[v]
    }

    /// Labels of `nodes`, in order.
    pub fn gather(&self, nodes: &[usize]) -> Vec<usize> {
        nodes.iter().map(|&v| self.labels[v]).collect()
    }

    /// `N × C` matrix with one-hot rows for `nodes` and zeros elsewhere.
    pub fn one_hot_rows(&self, nodes: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.labels.len(), self.num_classes);
        for &v in nodes {
            m.set(v, self.labels[v], 1.0);
        }
        m
    }

    pub fn histogram(&self, nodes: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for &v in nodes {
            h[self.labels[v]] += 1;
        }
        h
    }
}

/// Disjoint train, validation and test node sets.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = vec![0u8; num_nodes];
        for (tag, set) in [(1u8, &self.train), (2, &self.val), (3, &self.test)] {
            for &v in set {
                if v >= num_nodes {
                    return Err(Error::NodeOutOfRange { node: v, num_nodes });
                }
                if seen[v] != 0 {
                    return Err(Error::InvalidSplit(format!("node {v} appears in more than one set")));
                }
                seen[v] = tag;
            }
        }
        Ok(())
    }

    /// Membership mask of the training set.
    pub fn train_mask(&self, num_nodes: usize) -> Vec<bool> {
        let mut m = vec![false; num_nodes];
        for &v in &self.train {
            m[v] = true;
        }
        m
    }
}

/// Fraction of `nodes` whose prediction equals the label. Empty sets score 0.
pub fn accuracy(predictions: &[usize], labels: &LabelVector, nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&v| predictions[v] == labels.get(v))
        .count();
    hits as f64 / nodes.len() as f64
}

/// Row-wise argmax of a score matrix.
pub fn argmax_rows(scores: &Matrix) -> Vec<usize> {
    (0..scores.rows()).map(|i| crate::math::argmax(scores.row(i))).collect()
}

/// A graph together with node features, labels and a split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
    pub split: DataSplit,
}

impl Dataset {
    pub fn new(graph: Graph, features: FeatureMatrix, labels: LabelVector, split: DataSplit) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(Error::Shape {
                op: "Dataset::new features",
                expected: (n, features.cols()),
                found: features.shape(),
            });
        }
        if labels.len() != n {
            return Err(Error::Shape {
                op: "Dataset::new labels",
                expected: (n, 1),
                found: (labels.len(), 1),
            });
        }
        split.validate(n)?;
        Ok(Self {
            graph,
            features,
            labels,
            split,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Accuracy of always predicting the most frequent training class on `nodes`.
    pub fn majority_baseline(&self, nodes: &[usize]) -> f64 {
        let h = self.labels.histogram(&self.split.train);
        let top = h
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map_or(0, |(c, _)| c);
        accuracy(&vec![top; self.num_nodes()], &self.labels, nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_bounded() {
        assert!(LabelVector::new(vec![0, 1, 2], 3).is_ok());
        assert_eq!(
            LabelVector::new(vec![0, 3], 3).unwrap_err(),
            Error::LabelOutOfRange { label: 3, num_classes: 3 }
        );
    }

    #[test]
    fn split_must_be_disjoint_and_in_range() {
        let ok = DataSplit {
            train: vec![0, 1],
            val: vec![2],
            test: vec![3],
        };
        assert!(ok.validate(5).is_ok());
        let overlap = DataSplit {
            train: vec![0, 1],
            val: vec![1],
            test: vec![],
        };
        assert!(overlap.validate(5).is_err());
        assert!(ok.validate(3).is_err());
    }

    #[test]
    fn accuracy_and_argmax() {
        let labels = LabelVector::new(vec![0, 1, 1, 0], 2).unwrap();
        let scores = Matrix::new(4, 2, vec![1.0, 0.0, 0.0, 2.0, 3.0, 3.0, 0.0, 1.0]).unwrap();
        let pred = argmax_rows(&scores);
        assert_eq!(pred, vec![0, 1, 0, 1]);
        assert_eq!(accuracy(&pred, &labels, &[0, 1, 2, 3]), 0.5);
        assert_eq!(accuracy(&pred, &labels, &[]), 0.0);
    }
}
