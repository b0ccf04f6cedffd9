//! Graph classification with a regularized optimal-transport discrepancy.
//!
//! The pipeline turns each graph into vertex feature and structure
//! embeddings, solves a regularized transport problem between every pair of
//! graphs, exponentiates the resulting discrepancies into a kernel matrix,
//! and scores it with a precomputed-kernel SVM under nested cross-validation.

mod bytes;
pub mod classify;
pub mod config;
pub mod embed;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod linalg;
pub mod pipeline;
pub mod similarity;
pub mod solver;

pub use error::{Result, RwkError};
