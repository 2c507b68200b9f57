//! Agreement between metrics: Pearson correlations over pooled segment scores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MetricRegistry, Orientation, ScoreRecord};
use crate::numeric::{mean, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzeError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("correlation undefined: a vector has zero variance")]
    DegenerateVariance,
    #[error("{lang_pair}: metric {metric} has no segment-level scores")]
    NoSegmentScores { lang_pair: String, metric: String },
    #[error("metrics {0} and {1} share no segments")]
    NoSharedSegments(String, String),
    #[error("metric {0} has no specification")]
    UnknownMetric(String),
}

/// Sample Pearson correlation, two-pass with compensated sums.
///
/// Undefined (and reported as [`AnalyzeError::DegenerateVariance`]) when
/// either vector is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyzeError> {
    if x.len() != y.len() {
        return Err(AnalyzeError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(AnalyzeError::TooFewSamples(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalyzeError::NonFinite);
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxx = CompensatedSum::default();
    let mut syy = CompensatedSum::default();
    let mut sxy = CompensatedSum::default();
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx.add(dx * dx);
        syy.add(dy * dy);
        sxy.add(dx * dy);
    }
    let (sxx, syy) = (sxx.total(), syy.total());
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(AnalyzeError::DegenerateVariance);
    }
    let mut denom = (sxx * syy).sqrt();
    if !denom.is_normal() {
        // the product over- or underflowed
        denom = sxx.sqrt() * syy.sqrt();
    }
    Ok((sxy.total() / denom).clamp(-1.0, 1.0))
}

/// Symmetric metric-by-metric correlation matrix for one language pair.
///
/// Samples are matched on exact `(system, segment)` keys. A cell is `None`
/// when the two metrics share no keys or the correlation is undefined;
/// `shared[i][j]` tells which case applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub lang_pair: String,
    pub metric_ids: Vec<String>,
    pub oriented: bool,
    pub values: Vec<Vec<Option<f64>>>,
    /// Matched `(system, segment)` pairs behind each cell.
    pub shared: Vec<Vec<usize>>,
    /// Records of either metric without a partner, dropped from the cell.
    pub unmatched: Vec<Vec<usize>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.metric_ids.iter().position(|m| m == a)?;
        let j = self.metric_ids.iter().position(|m| m == b)?;
        self.values[i][j]
    }

    /// Fails on the first absent cell.
    pub fn require_complete(&self) -> Result<(), AnalyzeError> {
        for (i, row) in self.values.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    return Err(AnalyzeError::NoSharedSegments(
                        self.metric_ids[i].clone(),
                        self.metric_ids[j].clone(),
                    ));
                }
            }
        }
        Ok(())
    }
}

type Samples<'a> = BTreeMap<(&'a str, u64), f64>;

/// Correlations of raw metric-native scores.
pub fn metric_correlation_matrix(
    records: &[ScoreRecord],
    lang_pair: &str,
    metric_ids: &[String],
) -> Result<CorrelationMatrix, AnalyzeError> {
    build_matrix(records, lang_pair, metric_ids, None)
}

/// Correlations after orienting every metric so higher is better.
pub fn oriented_correlation_matrix(
    records: &[ScoreRecord],
    lang_pair: &str,
    metric_ids: &[String],
    registry: &MetricRegistry,
) -> Result<CorrelationMatrix, AnalyzeError> {
    build_matrix(records, lang_pair, metric_ids, Some(registry))
}

fn build_matrix(
    records: &[ScoreRecord],
    lang_pair: &str,
    metric_ids: &[String],
    registry: Option<&MetricRegistry>,
) -> Result<CorrelationMatrix, AnalyzeError> {
    let mut samples: Vec<Samples> = Vec::with_capacity(metric_ids.len());
    for metric in metric_ids {
        let orientation = match registry {
            Some(reg) => reg
                .get(metric)
                .map(|s| s.orientation())
                .ok_or_else(|| AnalyzeError::UnknownMetric(metric.clone()))?,
            None => Orientation::HigherBetter,
        };
        let raw: Samples = records
            .iter()
            .filter(|r| r.lang_pair() == lang_pair && r.metric_id() == metric)
            .filter_map(|r| r.segment_id().map(|seg| ((r.system_id(), seg), r.score())))
            .collect();
        if raw.is_empty() {
            return Err(AnalyzeError::NoSegmentScores {
                lang_pair: lang_pair.to_string(),
                metric: metric.clone(),
            });
        }
        let sign = match orientation {
            Orientation::HigherBetter => 1.0,
            Orientation::LowerBetter => -1.0,
        };
        samples.push(raw.into_iter().map(|(k, v)| (k, sign * v)).collect());
    }

    let n = metric_ids.len();
    let mut values = vec![vec![None; n]; n];
    let mut shared = vec![vec![0; n]; n];
    let mut unmatched = vec![vec![0; n]; n];
    for i in 0..n {
        values[i][i] = Some(1.0);
        shared[i][i] = samples[i].len();
        for j in i + 1..n {
            let (a, b) = (&samples[i], &samples[j]);
            let keys: BTreeSet<_> = a.keys().filter(|k| b.contains_key(*k)).collect();
            let x: Vec<f64> = keys.iter().map(|k| a[*k]).collect();
            let y: Vec<f64> = keys.iter().map(|k| b[*k]).collect();
            let r = pearson(&x, &y).ok();
            let dropped = a.len() + b.len() - 2 * keys.len();
            for (p, q) in [(i, j), (j, i)] {
                values[p][q] = r;
                shared[p][q] = keys.len();
                unmatched[p][q] = dropped;
            }
        }
    }
    Ok(CorrelationMatrix {
        lang_pair: lang_pair.to_string(),
        metric_ids: metric_ids.to_vec(),
        oriented: registry.is_some(),
        values,
        shared,
        unmatched,
    })
}
