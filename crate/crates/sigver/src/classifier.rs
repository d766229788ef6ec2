//! Enrollment pipeline: gallery splitting, the consensus filter, the
//! threshold fit, probe scoring, and the accept/reject decision.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines;
use crate::error::{Error, Result};
use crate::metric::{cosine_similarity, pairwise_matrix};
use crate::model::{
    Aggregation, ConsensusSet, Decision, FeatureVector, Label, SignatureSample, SimilarityMatrix,
    SplitSpec, Strategy, ThresholdModel, ThresholdParams,
};
use crate::stats;

/// Default confidence scaler for the threshold bound.
pub const DEFAULT_ALPHA: f64 = 0.99999;

/// Default consensus-filter offset, exp(-4).
pub fn default_e_consensus() -> f64 {
    (-4.0f64).exp()
}

/// Default threshold offset, exp(-4.5).
pub fn default_e_threshold() -> f64 {
    (-4.5f64).exp()
}

/// Everything enrollment needs besides the samples themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnrollConfig {
    /// Confidence scaler applied to the standard error of the consensus set.
    pub alpha: f64,
    /// Offset subtracted from the gallery mean to form the consensus filter bound.
    pub e_consensus: f64,
    /// Offset subtracted from the confidence bound to form the final threshold.
    pub e_threshold: f64,
    /// How probe similarities against the gallery collapse to one score.
    pub aggregation: Aggregation,
    pub split: SplitSpec,
    pub seed: u64,
}

impl EnrollConfig {
    /// Builds a config with the default tuning parameters.
    pub fn new(split: SplitSpec, seed: u64) -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            e_consensus: default_e_consensus(),
            e_threshold: default_e_threshold(),
            aggregation: Aggregation::Mean,
            split,
            seed,
        }
    }

    /// Checks the tuning parameters. `alpha` may be zero (which disables the
    /// confidence term entirely, useful in sweeps); the offsets must be
    /// strictly positive so the filter and the final threshold stay below
    /// their respective means.
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::invalid(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !self.e_consensus.is_finite() || self.e_consensus <= 0.0 {
            return Err(Error::invalid(format!(
                "e_consensus must be finite and > 0, got {}",
                self.e_consensus
            )));
        }
        if !self.e_threshold.is_finite() || self.e_threshold <= 0.0 {
            return Err(Error::invalid(format!(
                "e_threshold must be finite and > 0, got {}",
                self.e_threshold
            )));
        }
        Ok(())
    }

    pub(crate) fn params(&self) -> ThresholdParams {
        ThresholdParams {
            alpha: self.alpha,
            e_consensus: self.e_consensus,
            e_threshold: self.e_threshold,
            aggregation: self.aggregation,
        }
    }
}

/// The three disjoint sample lists a writer's genuine set is partitioned into.
#[derive(Debug, Clone)]
pub struct GallerySplit {
    pub gallery_a: Vec<SignatureSample>,
    pub gallery_b: Vec<SignatureSample>,
    pub probe_genuine: Vec<SignatureSample>,
}

/// Partitions one writer's genuine samples uniformly at random into the two
/// gallery lists and the held-out genuine probes.
///
/// Deterministic for a fixed input order and seed.
pub fn split_gallery(
    genuine_samples: &[SignatureSample],
    split: SplitSpec,
    seed: u64,
) -> Result<GallerySplit> {
    let first = genuine_samples
        .first()
        .ok_or_else(|| Error::invalid("no samples to split".to_string()))?;
    for s in genuine_samples {
        if s.writer_id != first.writer_id {
            return Err(Error::invalid(format!(
                "split input mixes writers {:?} and {:?}",
                first.writer_id, s.writer_id
            )));
        }
        if s.label != Label::Genuine {
            return Err(Error::invalid(format!(
                "split input contains a forged sample ({})",
                s.sample_id
            )));
        }
    }
    let required = split.genuine_required();
    if genuine_samples.len() < required {
        return Err(Error::InsufficientSamples {
            writer_id: first.writer_id.clone(),
            required,
            available: genuine_samples.len(),
        });
    }

    let mut order: Vec<usize> = (0..genuine_samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let take = |range: std::ops::Range<usize>| -> Vec<SignatureSample> {
        order[range]
            .iter()
            .map(|&i| genuine_samples[i].clone())
            .collect()
    };
    let a_end = split.n_gallery_a;
    let b_end = a_end + split.n_gallery_b;
    let p_end = b_end + split.n_probe_genuine;
    Ok(GallerySplit {
        gallery_a: take(0..a_end),
        gallery_b: take(a_end..b_end),
        probe_genuine: take(b_end..p_end),
    })
}

/// Keeps every matrix entry at or above the filtered mean `mu - e_consensus`.
///
/// The maximum entry is never below the mean, so with a positive offset the
/// retained set is always nonempty.
pub fn build_consensus(matrix: &SimilarityMatrix, e_consensus: f64) -> Result<ConsensusSet> {
    if !e_consensus.is_finite() || e_consensus <= 0.0 {
        return Err(Error::invalid(format!(
            "e_consensus must be finite and > 0, got {e_consensus}"
        )));
    }
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let source_mean = stats::mean(matrix.entries());
    let filter_mean = source_mean - e_consensus;
    let retained: Vec<f64> = matrix
        .entries()
        .iter()
        .copied()
        .filter(|v| *v >= filter_mean)
        .collect();
    debug_assert!(!retained.is_empty());
    Ok(ConsensusSet {
        retained,
        filter_mean,
        source_mean,
    })
}

/// Lower confidence bound on the consensus values, shifted down by
/// `e_threshold`: `mean - (std / sqrt(m)) * alpha - e_threshold`.
pub fn compute_threshold(consensus: &ConsensusSet, alpha: f64, e_threshold: f64) -> f64 {
    debug_assert!(!consensus.retained.is_empty());
    let m = consensus.retained.len() as f64;
    let mu = stats::mean(&consensus.retained);
    let sigma = stats::population_std(&consensus.retained);
    let f = sigma / m.sqrt() * alpha;
    mu - f - e_threshold
}

/// Fits the acceptance threshold for one strategy on a gallery similarity
/// matrix. Only the consensus strategy produces a retained set; the
/// baselines operate on the raw matrix.
pub fn fit_threshold(
    matrix: &SimilarityMatrix,
    strategy: Strategy,
    config: &EnrollConfig,
) -> Result<(f64, Option<ConsensusSet>)> {
    Ok(match strategy {
        Strategy::Max => (baselines::threshold_max(matrix), None),
        Strategy::Min => (baselines::threshold_min(matrix), None),
        Strategy::Mean => (baselines::threshold_mean(matrix), None),
        Strategy::Ci => (
            baselines::threshold_confidence_interval(matrix, config.alpha),
            None,
        ),
        Strategy::Consensus => {
            let consensus = build_consensus(matrix, config.e_consensus)?;
            let tau = compute_threshold(&consensus, config.alpha, config.e_threshold);
            (tau, Some(consensus))
        }
    })
}

/// Enrolls one writer with the consensus strategy. Returns the fitted model
/// and the held-out genuine probes from the split.
pub fn enroll(
    genuine_samples: &[SignatureSample],
    config: &EnrollConfig,
) -> Result<(ThresholdModel, Vec<SignatureSample>)> {
    enroll_with_strategy(genuine_samples, Strategy::Consensus, config)
}

/// Enrolls one writer with an arbitrary threshold strategy.
///
/// The gallery is split, all cross-partition similarities are computed (one
/// row per second-partition sample, one column per first-partition sample),
/// the threshold is fitted, and both partitions together become the model's
/// probe references.
pub fn enroll_with_strategy(
    genuine_samples: &[SignatureSample],
    strategy: Strategy,
    config: &EnrollConfig,
) -> Result<(ThresholdModel, Vec<SignatureSample>)> {
    config.validate()?;
    let split = split_gallery(genuine_samples, config.split, config.seed)?;
    let a_features: Vec<FeatureVector> =
        split.gallery_a.iter().map(|s| s.feature.clone()).collect();
    let b_features: Vec<FeatureVector> =
        split.gallery_b.iter().map(|s| s.feature.clone()).collect();
    let matrix = pairwise_matrix(&b_features, &a_features)?;
    let (tau_c, consensus) = fit_threshold(&matrix, strategy, config)?;
    let mut gallery_refs = a_features;
    gallery_refs.extend(b_features);
    let model = ThresholdModel {
        strategy,
        tau_c,
        consensus,
        params: config.params(),
        gallery_refs,
    };
    Ok((model, split.probe_genuine))
}

/// Collapses a probe's similarities against every gallery reference into a
/// single score using the model's aggregation.
pub fn score_probe(probe: &FeatureVector, model: &ThresholdModel) -> Result<f64> {
    if model.gallery_refs.is_empty() {
        return Err(Error::invalid(
            "model has no gallery references".to_string(),
        ));
    }
    let mut sims = Vec::with_capacity(model.gallery_refs.len());
    for r in &model.gallery_refs {
        sims.push(cosine_similarity(probe, r)?);
    }
    Ok(match model.params.aggregation {
        Aggregation::Mean => stats::mean(&sims),
        Aggregation::Max => sims.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Min => sims.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Acceptance rule: a probe scoring at or above the threshold is genuine.
pub fn classify(score: f64, tau_c: f64) -> Decision {
    if score >= tau_c {
        Decision::Genuine
    } else {
        Decision::Forge
    }
}
