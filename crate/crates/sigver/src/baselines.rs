//! Baseline threshold criteria fitted on the raw gallery similarity matrix,
//! for head-to-head comparison with the consensus threshold.
//!
//! `SimilarityMatrix` is nonempty by construction, so these are total.

use crate::model::SimilarityMatrix;
use crate::stats;

/// Maximum gallery similarity.
pub fn threshold_max(matrix: &SimilarityMatrix) -> f64 {
    matrix
        .entries()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Minimum gallery similarity.
pub fn threshold_min(matrix: &SimilarityMatrix) -> f64 {
    matrix
        .entries()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Mean gallery similarity.
pub fn threshold_mean(matrix: &SimilarityMatrix) -> f64 {
    stats::mean(matrix.entries())
}

/// Lower confidence bound on the raw similarities, with no consensus
/// filtering and no offset: `mean - (std / sqrt(m)) * alpha`.
pub fn threshold_confidence_interval(matrix: &SimilarityMatrix, alpha: f64) -> f64 {
    let entries = matrix.entries();
    let m = entries.len() as f64;
    let mu = stats::mean(entries);
    let sigma = stats::population_std(entries);
    mu - sigma / m.sqrt() * alpha
}
