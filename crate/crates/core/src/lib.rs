//! Multimodal recommendation engine: item neighbor graphs built from
//! content features, light graph propagation over frozen adjacencies, and
//! per-pair attention that mixes id, visual, textual, and blended channels
//! into one ranking score. Training couples a pairwise ranking loss with a
//! modality ranking term and a contrastive alignment term.

pub mod attention;
pub mod dataset;
pub mod dense;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod hyperparams;
pub mod io;
pub mod losses;
pub mod params;
pub mod propagation;
pub mod scalar;
pub mod sparse;
pub mod synthetic;
pub mod trainer;

pub use dataset::{remap_ids, split_dataset, validate_dataset, Dataset, Modality};
pub use dense::{DenseMatrix, FeatureMatrix};
pub use error::{Error, Result};
pub use graph::GraphBundle;
pub use hyperparams::{CfModel, Hyperparams};
pub use params::{Gradients, ModelParams};
pub use scalar::Scalar;
pub use sparse::SparseAdjacency;
