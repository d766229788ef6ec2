//! Cosine similarity between feature vectors and the pairwise gallery matrix.

use crate::error::{Error, Result};
use crate::model::{FeatureVector, SimilarityMatrix};

/// Cosine similarity of two equal-dimension vectors.
///
/// Accumulates in f64 and clamps the quotient to [-1, 1] so downstream
/// consumers never see a rounding artifact escape the valid range.
/// `FeatureVector` construction already rules out zero-norm operands.
pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    Ok((dot / (norm_a.sqrt() * norm_b.sqrt())).clamp(-1.0, 1.0))
}

/// All pairwise similarities between two galleries, as a row-major matrix
/// with one row per `row_gallery` sample and one column per
/// `col_gallery` sample.
pub fn pairwise_matrix(
    row_gallery: &[FeatureVector],
    col_gallery: &[FeatureVector],
) -> Result<SimilarityMatrix> {
    if row_gallery.is_empty() || col_gallery.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut entries = Vec::with_capacity(row_gallery.len() * col_gallery.len());
    for (row, r) in row_gallery.iter().enumerate() {
        for (col, c) in col_gallery.iter().enumerate() {
            let value = cosine_similarity(r, c).map_err(|e| Error::MatrixEntry {
                row,
                col,
                source: Box::new(e),
            })?;
            entries.push(value);
        }
    }
    SimilarityMatrix::new(row_gallery.len(), col_gallery.len(), entries)
}
