//! Robust scaling, cross-metric averaging and the remap to AutoRank.
//!
//! For every metric `m` in the policy, oriented system scores `x` are scaled as
//!
//! ```text
//! z = (x - median) / max(eps, Q100 - Q25)
//! ```
//!
//! Percentiles interpolate linearly between order statistics at
//! `h = (n - 1) * p / 100`, so the median of an even-sized sample is the
//! midpoint of the two central values. The scaled values are averaged with
//! equal weights and mapped linearly onto `1..=N`, best system first.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::aggregate::{system_level_scores, AggregateError};
use crate::model::{
    LangPairPolicy, MetricColumn, MetricRegistry, Orientation, RankingResult, ScoreRecord, SystemRanking,
};
use crate::numeric::CompensatedSum;

pub use crate::model::RobustStats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutorankError {
    #[error("empty input")]
    EmptyInput,
    #[error("percentile {0} outside [0, 100]")]
    InvalidPercentile(f64),
    #[error("metric {metric} does not cover the same systems as {reference}")]
    SystemSetMismatch { metric: String, reference: String },
    #[error("{lang_pair}: no scores for policy metric {metric}")]
    PolicyMetricMissing { lang_pair: String, metric: String },
    #[error("{lang_pair}: system {system} has no scores for {metric}")]
    MissingSystemScore {
        lang_pair: String,
        system: String,
        metric: String,
    },
    #[error("metric {0} has no specification")]
    UnknownMetric(String),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
}

/// Linearly interpolated `p`-th percentile.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, AutorankError> {
    if values.is_empty() {
        return Err(AutorankError::EmptyInput);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(AutorankError::InvalidPercentile(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor();
    let (a, b) = (sorted[lo as usize], sorted[h.ceil() as usize]);
    if a == b {
        a
    } else {
        a + (h - lo) * (b - a)
    }
}

pub fn robust_stats(values: &[f64], epsilon: f64) -> Result<RobustStats, AutorankError> {
    if values.is_empty() {
        return Err(AutorankError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = percentile_sorted(&sorted, 50.0);
    let q25 = percentile_sorted(&sorted, 25.0);
    let q100 = sorted[sorted.len() - 1];
    Ok(RobustStats {
        median,
        q25,
        q100,
        spread: (q100 - q25).max(epsilon),
    })
}

/// Median–interpercentile scaling of oriented scores.
pub fn robust_scale(
    scores: &BTreeMap<String, f64>,
    epsilon: f64,
) -> Result<(BTreeMap<String, f64>, RobustStats), AutorankError> {
    let values: Vec<f64> = scores.values().copied().collect();
    let stats = robust_stats(&values, epsilon)?;
    let z = scores
        .iter()
        .map(|(s, &x)| (s.clone(), (x - stats.median) / stats.spread))
        .collect();
    Ok((z, stats))
}

/// Makes higher better: lower-better scores are negated.
pub fn orient(scores: &BTreeMap<String, f64>, orientation: Orientation) -> BTreeMap<String, f64> {
    scores
        .iter()
        .map(|(s, &x)| {
            let v = match orientation {
                Orientation::HigherBetter => x,
                Orientation::LowerBetter => -x,
            };
            (s.clone(), v)
        })
        .collect()
}

/// Equal-weight average of scaled scores across metrics.
pub fn mean_robust(
    z_by_metric: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<BTreeMap<String, f64>, AutorankError> {
    let mut metrics = z_by_metric.iter();
    let (reference, first) = metrics.next().ok_or(AutorankError::EmptyInput)?;
    for (metric, z) in metrics {
        if !z.keys().eq(first.keys()) {
            return Err(AutorankError::SystemSetMismatch {
                metric: metric.clone(),
                reference: reference.clone(),
            });
        }
    }
    let n = z_by_metric.len() as f64;
    Ok(first
        .keys()
        .map(|s| {
            let sum: CompensatedSum = z_by_metric.values().map(|z| z[s]).collect();
            (s.clone(), sum.total() / n)
        })
        .collect())
}

/// Maps averages onto `1..=N`: the best system gets 1, the worst N.
/// When every average is equal all systems share rank 1.
pub fn remap_to_rank(mean: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, AutorankError> {
    if mean.is_empty() {
        return Err(AutorankError::EmptyInput);
    }
    let max = mean.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = mean.values().copied().fold(f64::INFINITY, f64::min);
    let span = (mean.len() - 1) as f64;
    Ok(mean
        .iter()
        .map(|(s, &z)| {
            let rank = if max == min {
                1.0
            } else {
                1.0 + span * ((max - z) / (max - min))
            };
            (s.clone(), rank)
        })
        .collect())
}

/// Full pipeline for one language pair.
///
/// Every system with any score on the pair must have scores for every policy
/// metric; metrics outside the policy are ignored.
pub fn rank_language_pair(
    records: &[ScoreRecord],
    policy: &LangPairPolicy,
    registry: &MetricRegistry,
) -> Result<RankingResult, AutorankError> {
    let lp = policy.lang_pair();
    let systems: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.lang_pair() == lp)
        .map(ScoreRecord::system_id)
        .collect();
    if systems.is_empty() {
        return Err(AutorankError::EmptyInput);
    }

    let mut native = BTreeMap::new();
    let mut z_by_metric = BTreeMap::new();
    let mut stats = BTreeMap::new();
    let mut columns = Vec::new();
    for metric in policy.metric_ids() {
        let spec = registry
            .get(metric)
            .ok_or_else(|| AutorankError::UnknownMetric(metric.clone()))?;
        let scores = system_level_scores(records, lp, metric)?;
        if scores.is_empty() {
            return Err(AutorankError::PolicyMetricMissing {
                lang_pair: lp.to_string(),
                metric: metric.clone(),
            });
        }
        if let Some(system) = systems.iter().find(|s| !scores.contains_key(**s)) {
            return Err(AutorankError::MissingSystemScore {
                lang_pair: lp.to_string(),
                system: system.to_string(),
                metric: metric.clone(),
            });
        }
        let (z, metric_stats) = robust_scale(&orient(&scores, spec.orientation()), policy.epsilon())?;
        columns.push(MetricColumn {
            metric_id: metric.clone(),
            orientation: spec.orientation(),
            decimals: spec.decimals(),
        });
        native.insert(metric.clone(), scores);
        z_by_metric.insert(metric.clone(), z);
        stats.insert(metric.clone(), metric_stats);
    }

    let mean = mean_robust(&z_by_metric)?;
    let ranks = remap_to_rank(&mean)?;
    let mut per_system: Vec<SystemRanking> = systems
        .iter()
        .map(|&s| SystemRanking {
            system_id: s.to_string(),
            system_scores: native.iter().map(|(m, v)| (m.clone(), v[s])).collect(),
            robust_scores: z_by_metric.iter().map(|(m, z)| (m.clone(), z[s])).collect(),
            mean_robust: mean[s],
            autorank: ranks[s],
        })
        .collect();
    per_system.sort_by(|a, b| {
        a.autorank
            .total_cmp(&b.autorank)
            .then(b.mean_robust.total_cmp(&a.mean_robust))
            .then_with(|| a.system_id.cmp(&b.system_id))
    });

    Ok(RankingResult {
        lang_pair: lp.to_string(),
        rule: policy.rule(),
        epsilon: policy.epsilon(),
        n_systems: per_system.len(),
        metrics: columns,
        per_system,
        per_metric_stats: stats,
    })
}

/// Orders systems by ascending AutoRank, ties by system id.
pub fn by_rank(a: (&str, f64), b: (&str, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0))
}
