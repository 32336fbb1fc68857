//! Shared inputs for the benchmarks.

use nalgebra::DMatrix;

/// Deterministic smooth `s x m` stage values.
pub fn stage_values(s: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(s, m, |i, j| ((i * 7 + 3 * j + 1) as f64 * 0.37).sin())
}
