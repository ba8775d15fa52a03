//! Fixtures shared by the benchmarks.

use levsketch::oracle::gen_example1;
use levsketch::{compute_params, DenseMatrix, MatrixSampleStore, Params};

/// Rank-30 test matrix with `m` rows and 100 columns.
pub fn rank30(m: usize) -> DenseMatrix {
    gen_example1(m, 100, 70, 1).expect("valid generator settings")
}

/// Practical parameters with `κ = 1` and `‖A‖ = ‖A‖_F`.
pub fn practical(store: &MatrixSampleStore, k: usize, p: u64) -> Params {
    let f = store.frobenius_norm();
    compute_params(0.5, 0.1, k, 1.0, f, f, Some(p)).expect("valid parameters")
}
