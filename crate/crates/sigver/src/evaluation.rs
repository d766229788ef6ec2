//! Confusion accounting, rate computation, and the repeated-trial
//! per-writer evaluation protocol, including strategy comparison and
//! alpha sweeps.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify, enroll_with_strategy, score_probe, EnrollConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{ConfusionCounts, Decision, Label, RateReport, SignatureSample, Strategy};

/// Tallies accept/reject decisions against ground-truth labels.
pub fn confusion(decisions: &[Decision], labels: &[Label]) -> Result<ConfusionCounts> {
    if decisions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            decisions: decisions.len(),
            labels: labels.len(),
        });
    }
    if decisions.is_empty() {
        return Err(Error::invalid("no probes to count".to_string()));
    }
    let mut counts = ConfusionCounts::default();
    for (d, l) in decisions.iter().zip(labels) {
        match (d, l) {
            (Decision::Genuine, Label::Genuine) => counts.true_positives += 1,
            (Decision::Forge, Label::Forged) => counts.true_negatives += 1,
            (Decision::Genuine, Label::Forged) => counts.false_positives += 1,
            (Decision::Forge, Label::Genuine) => counts.false_negatives += 1,
        }
    }
    Ok(counts)
}

/// Computes accuracy, FAR, FRR, and their average from confusion counts,
/// all in percent. Each rate requires at least one probe of its class.
pub fn rates(counts: ConfusionCounts) -> Result<RateReport> {
    let genuine_total = counts.true_positives + counts.false_negatives;
    let forged_total = counts.false_positives + counts.true_negatives;
    if genuine_total == 0 {
        return Err(Error::UndefinedRate { class: "genuine" });
    }
    if forged_total == 0 {
        return Err(Error::UndefinedRate { class: "forged" });
    }
    let accuracy =
        100.0 * (counts.true_positives + counts.true_negatives) as f64 / counts.total() as f64;
    let far = 100.0 * counts.false_positives as f64 / forged_total as f64;
    let frr = 100.0 * counts.false_negatives as f64 / genuine_total as f64;
    let aer = (far + frr) / 2.0;
    Ok(RateReport {
        counts,
        accuracy,
        far,
        frr,
        aer,
    })
}

/// Mean (or spread) of the four headline rates, used for macro averages
/// and across-trial summaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub accuracy: f64,
    pub far: f64,
    pub frr: f64,
    pub aer: f64,
}

impl RateSummary {
    fn from_reports<'a, I>(reports: I) -> Option<RateSummary>
    where
        I: IntoIterator<Item = &'a RateReport>,
    {
        let mut n = 0usize;
        let mut sum = [0.0f64; 4];
        for r in reports {
            n += 1;
            sum[0] += r.accuracy;
            sum[1] += r.far;
            sum[2] += r.frr;
            sum[3] += r.aer;
        }
        (n > 0).then(|| RateSummary {
            accuracy: sum[0] / n as f64,
            far: sum[1] / n as f64,
            frr: sum[2] / n as f64,
            aer: sum[3] / n as f64,
        })
    }
}

/// A writer left out of a protocol run, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedWriter {
    pub writer_id: String,
    pub reason: String,
}

/// Outcome of one protocol run: per-writer rates, the micro-averaged
/// aggregate, a macro average, per-trial aggregates, and any skipped
/// writers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub strategy: Strategy,
    pub per_writer: BTreeMap<String, RateReport>,
    /// Micro-average: confusion counts summed over writers and trials,
    /// rates computed once from the sums.
    pub aggregate: RateReport,
    /// Unweighted mean of the per-writer rates.
    pub macro_average: RateSummary,
    /// Micro-averaged rates of each trial in isolation.
    pub trial_rates: Vec<RateReport>,
    pub trials: usize,
    pub seed: u64,
    pub skipped: Vec<SkippedWriter>,
}

impl ProtocolResult {
    /// Mean of the per-trial rates.
    pub fn trial_mean(&self) -> RateSummary {
        RateSummary::from_reports(&self.trial_rates).expect("trial_rates is never empty")
    }

    /// Population standard deviation of the per-trial rates.
    pub fn trial_std(&self) -> RateSummary {
        let mean = self.trial_mean();
        let n = self.trial_rates.len() as f64;
        let mut var = [0.0f64; 4];
        for r in &self.trial_rates {
            var[0] += (r.accuracy - mean.accuracy).powi(2);
            var[1] += (r.far - mean.far).powi(2);
            var[2] += (r.frr - mean.frr).powi(2);
            var[3] += (r.aer - mean.aer).powi(2);
        }
        RateSummary {
            accuracy: (var[0] / n).sqrt(),
            far: (var[1] / n).sqrt(),
            frr: (var[2] / n).sqrt(),
            aer: (var[3] / n).sqrt(),
        }
    }
}

/// Deterministic per-(writer, trial, purpose) seed derived from the master
/// seed, so writers and trials are independent of iteration order and of
/// each other.
pub fn derive_seed(master: u64, writer_id: &str, trial: u64, purpose: &str) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let mut absorb = |bytes: &[u8]| {
        for &b in bytes {
            h = (h ^ u64::from(b)).wrapping_mul(PRIME);
        }
        h = (h ^ 0xff).wrapping_mul(PRIME);
    };
    absorb(&master.to_le_bytes());
    absorb(writer_id.as_bytes());
    absorb(&trial.to_le_bytes());
    absorb(purpose.as_bytes());
    // splitmix64 finisher to spread the avalanche over all 64 bits.
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Picks the forged probes for one trial: all of them when the writer has
/// at most `n_probe_forge`, otherwise a without-replacement sample.
fn select_forgeries(forged: &[SignatureSample], n_probe_forge: usize, seed: u64) -> Vec<usize> {
    if forged.len() <= n_probe_forge {
        return (0..forged.len()).collect();
    }
    let mut order: Vec<usize> = (0..forged.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.truncate(n_probe_forge);
    order
}

/// Runs the full repeated-trial evaluation: per writer and trial, enroll on
/// the genuine samples with a derived seed, score the held-out genuine
/// probes and a forged-probe draw, and accumulate confusion counts.
///
/// Writers with too few genuine samples or no forgeries are skipped and
/// reported in the result, never silently dropped.
pub fn run_protocol(
    dataset: &Dataset,
    config: &EnrollConfig,
    strategy: Strategy,
    trials: usize,
) -> Result<ProtocolResult> {
    config.validate()?;
    if trials < 1 {
        return Err(Error::invalid("trials must be at least 1".to_string()));
    }
    if config.split.n_probe_genuine < 1 || config.split.n_probe_forge < 1 {
        return Err(Error::invalid(
            "the protocol needs at least one genuine and one forged probe per trial".to_string(),
        ));
    }
    let master = config.seed;
    let required = config.split.genuine_required();

    let mut per_writer = BTreeMap::new();
    let mut per_trial = vec![ConfusionCounts::default(); trials];
    let mut total = ConfusionCounts::default();
    let mut skipped = Vec::new();
    for writer in &dataset.writers {
        if writer.genuine.len() < required {
            skipped.push(SkippedWriter {
                writer_id: writer.writer_id.clone(),
                reason: format!(
                    "needs {required} genuine samples, has {}",
                    writer.genuine.len()
                ),
            });
            continue;
        }
        if writer.forged.is_empty() {
            skipped.push(SkippedWriter {
                writer_id: writer.writer_id.clone(),
                reason: "has no forgeries to probe with".to_string(),
            });
            continue;
        }

        let mut writer_counts = ConfusionCounts::default();
        for (trial, trial_counts) in per_trial.iter_mut().enumerate() {
            let mut trial_config = *config;
            trial_config.seed = derive_seed(master, &writer.writer_id, trial as u64, "split");
            let (model, probe_genuine) =
                enroll_with_strategy(&writer.genuine, strategy, &trial_config)?;
            let forge_seed = derive_seed(master, &writer.writer_id, trial as u64, "forge");
            let forge_picks =
                select_forgeries(&writer.forged, config.split.n_probe_forge, forge_seed);

            let mut decisions = Vec::with_capacity(probe_genuine.len() + forge_picks.len());
            let mut labels = Vec::with_capacity(decisions.capacity());
            for probe in &probe_genuine {
                let score = score_probe(&probe.feature, &model)?;
                decisions.push(classify(score, model.tau_c));
                labels.push(Label::Genuine);
            }
            for &i in &forge_picks {
                let score = score_probe(&writer.forged[i].feature, &model)?;
                decisions.push(classify(score, model.tau_c));
                labels.push(Label::Forged);
            }
            let counts = confusion(&decisions, &labels)?;
            writer_counts.add(&counts);
            trial_counts.add(&counts);
        }
        total.add(&writer_counts);
        per_writer.insert(writer.writer_id.clone(), rates(writer_counts)?);
    }

    if per_writer.is_empty() {
        return Err(Error::invalid(format!(
            "every writer was skipped ({} total); nothing to evaluate",
            skipped.len()
        )));
    }
    let aggregate = rates(total)?;
    let macro_average =
        RateSummary::from_reports(per_writer.values()).expect("at least one writer evaluated");
    let trial_rates = per_trial.into_iter().map(rates).collect::<Result<_>>()?;
    Ok(ProtocolResult {
        strategy,
        per_writer,
        aggregate,
        macro_average,
        trial_rates,
        trials,
        seed: master,
        skipped,
    })
}

/// Runs the protocol once per strategy over identical splits and probe
/// draws, so result differences isolate the threshold criterion.
pub fn compare_strategies(
    dataset: &Dataset,
    config: &EnrollConfig,
    strategies: &[Strategy],
    trials: usize,
) -> Result<BTreeMap<Strategy, ProtocolResult>> {
    if strategies.is_empty() {
        return Err(Error::invalid("no strategies to compare".to_string()));
    }
    let mut results = BTreeMap::new();
    for &strategy in strategies {
        results.insert(strategy, run_protocol(dataset, config, strategy, trials)?);
    }
    Ok(results)
}

/// One row of an alpha sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub result: ProtocolResult,
}

/// Reruns the protocol for each alpha with everything else held fixed.
pub fn sweep_alpha(
    dataset: &Dataset,
    config: &EnrollConfig,
    alphas: &[f64],
    strategy: Strategy,
    trials: usize,
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::invalid("no alpha values to sweep".to_string()));
    }
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut swept = *config;
        swept.alpha = alpha;
        rows.push(SweepRow {
            alpha,
            result: run_protocol(dataset, &swept, strategy, trials)?,
        });
    }
    Ok(rows)
}
