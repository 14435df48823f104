//! Scalable graph neural network training: graph storage and normalized
//! propagation, hand-written MLP numerics, mini-batch samplers, precomputed
//! hop models, label propagation, the layer-wise ensembling trainer and the
//! experiment harness logic. `no_std` with `alloc`; file formats and the CLI
//! live in the `scalegnn` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod adjacency;
pub mod data;
pub mod engcn;
pub mod error;
pub mod graph;
pub mod harness;
pub mod labelprop;
pub mod math;
pub mod matrix;
pub mod meter;
pub mod models;
pub mod nn;
pub mod rng;
pub mod sampling;
pub mod sbm;
pub mod train;

pub use adjacency::{NormKind, NormSpec, NormalizedAdjacency};
pub use data::{DataSplit, Dataset, LabelVector};
pub use error::{Error, Result};
pub use graph::Graph;
pub use matrix::{FeatureMatrix, LabelMatrix, Matrix};
