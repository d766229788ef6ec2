//! Writer-dependent offline signature verification over precomputed
//! feature vectors.
//!
//! Each writer is enrolled from a small gallery of genuine signatures.
//! The gallery is split in two, every cross-partition cosine similarity is
//! computed, a consensus filter drops low-agreement pairs, and a lower
//! confidence bound on the surviving values becomes the writer's personal
//! acceptance threshold. A probe signature is accepted when its aggregated
//! similarity to the gallery reaches that threshold.
//!
//! The crate also ships the simpler baselines (max, min, mean, and the
//! unfiltered confidence bound), a full FAR/FRR evaluation protocol with
//! deterministic per-writer trials, dataset loading in a text and a binary
//! format, and a synthetic dataset generator for end-to-end testing.

pub mod baselines;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod metric;
pub mod model;
pub(crate) mod stats;

pub use error::{Error, Result};
pub use model::{
    load_model_file, save_model_file, Aggregation, ConfusionCounts, ConsensusSet, Decision,
    FeatureVector, Label, ModelFile, RateReport, SignatureSample, SimilarityMatrix, SplitSpec,
    Strategy, ThresholdModel, ThresholdParams, FORMAT_VERSION,
};

pub use baselines::{threshold_confidence_interval, threshold_max, threshold_mean, threshold_min};
pub use classifier::{
    build_consensus, classify, compute_threshold, default_e_consensus, default_e_threshold,
    enroll, enroll_with_strategy, fit_threshold, score_probe, split_gallery, EnrollConfig,
    GallerySplit, DEFAULT_ALPHA,
};
pub use dataset::{
    class_feature_stats, convert_npy_dir, generate_synthetic, load_dataset, save_dataset,
    ClassStats, ConvertReport, Dataset, DatasetFormat, DatasetManifest, SyntheticConfig,
    ValueStats, WriterEntry, WriterSamples,
};
pub use evaluation::{
    compare_strategies, confusion, derive_seed, rates, run_protocol, sweep_alpha, ProtocolResult,
    RateSummary, SkippedWriter, SweepRow,
};
pub use metric::{cosine_similarity, pairwise_matrix};
