//! Sublinear approximation of statistical leverage scores and matrix
//! coherence for low-rank matrices held in a sampling data structure.
//!
//! The pipeline is: build a [`MatrixSampleStore`], derive [`Params`], run
//! [`qisvd`] to obtain a succinct [`SketchDescription`] of approximate left
//! singular vectors, then score rows with [`qisls_all`]. The [`oracle`]
//! module provides exact scores and the synthetic generators used to check
//! the approximation.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod oracle;
pub mod rng;
pub mod sample_tree;
pub mod sketch;
pub mod store;
pub mod svd;

pub use error::{Error, Result};
pub use estimator::{estimate_inner, orthogonality_defect, qisls_all, qisls_score, LeverageReport, ScoreMode};
pub use matrix::DenseMatrix;
pub use sample_tree::SampleTree;
pub use sketch::{compute_params, qisvd, Params, SampledIndex, SketchConfig, SketchDescription};
pub use store::MatrixSampleStore;
pub use svd::{svd_dense, truncate_top_k, SvdResult};
