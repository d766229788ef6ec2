//! Core domain types: feature vectors, samples, splits, similarity
//! matrices, fitted threshold models, and rate reports.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current on-disk format version for model files and dataset manifests.
pub const FORMAT_VERSION: u32 = 1;

/// A fixed-dimension real-valued feature vector for one signature sample.
///
/// Construction rejects empty, non-finite, and all-zero inputs, so a value
/// of this type is always usable as a cosine-similarity operand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature);
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(Error::DegenerateVector);
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Ground-truth class of a signature sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Genuine,
    Forged,
}

impl Label {
    /// Single-letter code used by the text feature-file format.
    pub fn code(self) -> char {
        match self {
            Label::Genuine => 'G',
            Label::Forged => 'F',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'G' => Some(Label::Genuine),
            'F' => Some(Label::Forged),
            _ => None,
        }
    }
}

/// Outcome of applying the acceptance rule to one probe score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Forge,
    Genuine,
}

impl Decision {
    /// 1 for an accepted (genuine) probe, 0 for a rejected (forge) one.
    pub fn as_bit(self) -> u8 {
        match self {
            Decision::Genuine => 1,
            Decision::Forge => 0,
        }
    }
}

/// One labeled signature sample of one writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureSample {
    pub writer_id: String,
    pub sample_id: String,
    pub label: Label,
    pub feature: FeatureVector,
}

/// Per-writer sample counts for one experiment: the two gallery partitions
/// and the held-out genuine and forged probe draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_gallery_a: usize,
    pub n_gallery_b: usize,
    pub n_probe_genuine: usize,
    pub n_probe_forge: usize,
}

impl SplitSpec {
    /// Builds a split, requiring `n_gallery_a >= n_gallery_b >= 1`.
    pub fn new(
        n_gallery_a: usize,
        n_gallery_b: usize,
        n_probe_genuine: usize,
        n_probe_forge: usize,
    ) -> Result<Self> {
        if n_gallery_b < 1 || n_gallery_a < n_gallery_b {
            return Err(Error::invalid(format!(
                "gallery split must satisfy a >= b >= 1, got a = {n_gallery_a}, b = {n_gallery_b}"
            )));
        }
        Ok(Self {
            n_gallery_a,
            n_gallery_b,
            n_probe_genuine,
            n_probe_forge,
        })
    }

    /// Genuine samples consumed per writer: both galleries plus genuine probes.
    pub fn genuine_required(&self) -> usize {
        self.n_gallery_a + self.n_gallery_b + self.n_probe_genuine
    }
}

/// Dense row-major matrix of pairwise cosine similarities.
///
/// Rows index the smaller gallery partition, columns the larger one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from row-major entries, all of which must lie in [-1, 1].
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if entries.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix shape {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        for (i, &value) in entries.iter().enumerate() {
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::invalid(format!(
                    "matrix entry ({}, {}) = {value} outside [-1, 1]",
                    i / cols,
                    i % cols
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    /// All entries in row-major order.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Gallery similarity values retained by the consensus filter, together
/// with the means that drove the filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSet {
    /// Retained similarity values, in row-major scan order of the source matrix.
    pub retained: Vec<f64>,
    /// The filter bound: source mean minus the consensus offset.
    pub filter_mean: f64,
    /// Arithmetic mean of the full source matrix.
    pub source_mean: f64,
}

impl ConsensusSet {
    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }
}

/// How a probe's similarities to the gallery references collapse to one score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
    Min,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
            Aggregation::Min => "min",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            "min" => Ok(Aggregation::Min),
            other => Err(Error::invalid(format!(
                "unknown aggregation {other:?}, expected mean, max, or min"
            ))),
        }
    }
}

/// Threshold criterion used to fit a writer's acceptance bound.
///
/// Declaration order is the canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Maximum gallery similarity.
    Max,
    /// Minimum gallery similarity.
    Min,
    /// Mean gallery similarity.
    Mean,
    /// Lower confidence bound on the raw gallery similarities.
    Ci,
    /// Consensus-filtered lower confidence bound with tuning offsets.
    Consensus,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Max,
        Strategy::Min,
        Strategy::Mean,
        Strategy::Ci,
        Strategy::Consensus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Max => "max",
            Strategy::Min => "min",
            Strategy::Mean => "mean",
            Strategy::Ci => "ci",
            Strategy::Consensus => "consensus",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Strategy::Max),
            "min" => Ok(Strategy::Min),
            "mean" => Ok(Strategy::Mean),
            "ci" => Ok(Strategy::Ci),
            "consensus" => Ok(Strategy::Consensus),
            other => Err(Error::invalid(format!(
                "unknown strategy {other:?}, expected max, min, mean, ci, or consensus"
            ))),
        }
    }
}

/// Parameters a threshold was fitted with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub alpha: f64,
    pub e_consensus: f64,
    pub e_threshold: f64,
    pub aggregation: Aggregation,
}

/// A writer's fitted acceptance threshold plus everything needed to score
/// new probes against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub strategy: Strategy,
    /// Acceptance bound: probes scoring at or above it are genuine.
    pub tau_c: f64,
    /// Consensus values behind `tau_c`; `None` for the baseline strategies,
    /// which fit directly on the raw matrix.
    pub consensus: Option<ConsensusSet>,
    pub params: ThresholdParams,
    /// Full enrolled gallery (both partitions) used as probe references.
    pub gallery_refs: Vec<FeatureVector>,
}

impl ThresholdModel {
    /// Feature dimension of the gallery references.
    pub fn dim(&self) -> usize {
        self.gallery_refs.first().map_or(0, FeatureVector::dim)
    }

    /// Number of similarity values retained by the consensus filter, 0 for baselines.
    pub fn consensus_size(&self) -> usize {
        self.consensus.as_ref().map_or(0, ConsensusSet::len)
    }
}

/// Confusion-matrix counts over a set of scored probes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Genuine probes accepted.
    pub true_positives: u64,
    /// Forged probes rejected.
    pub true_negatives: u64,
    /// Forged probes accepted.
    pub false_positives: u64,
    /// Genuine probes rejected.
    pub false_negatives: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.true_positives += other.true_positives;
        self.true_negatives += other.true_negatives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

/// Accuracy, false acceptance, false rejection, and average error, all in
/// percent, next to the counts they were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub far: f64,
    pub frr: f64,
    pub aer: f64,
}

/// Self-contained on-disk form of an enrolled model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub writer_id: String,
    pub dataset: String,
    pub feature_model: String,
    pub model: ThresholdModel,
}

/// Writes a model file as pretty-printed JSON.
pub fn save_model_file(model_file: &ModelFile, path: &Path) -> Result<()> {
    let json =
        serde_json::to_string_pretty(model_file).map_err(|e| Error::json(path.to_owned(), e))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path.to_owned(), e))
}

/// Reads a model file back, checking the format version and that the
/// gallery references are present and dimensionally consistent.
pub fn load_model_file(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.to_owned(), e))?;
    let model_file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::json(path.to_owned(), e))?;
    if model_file.format_version != FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported model format_version {}, expected {}",
            model_file.format_version, FORMAT_VERSION
        )));
    }
    let model = &model_file.model;
    if model.gallery_refs.is_empty() {
        return Err(Error::invalid(
            "model has no gallery references".to_string(),
        ));
    }
    let dim = model.gallery_refs[0].dim();
    for r in &model.gallery_refs {
        if r.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.dim(),
            });
        }
    }
    if !model.tau_c.is_finite() {
        return Err(Error::invalid("model threshold is not finite".to_string()));
    }
    Ok(model_file)
}
