//! Segment-to-system aggregation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::ScoreRecord;
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("{lang_pair}/{metric}: system {system} mixes segment- and system-level scores")]
    MixedGranularity {
        lang_pair: String,
        metric: String,
        system: String,
    },
    #[error("{lang_pair}/{metric}: system {system} has more than one system-level score")]
    DuplicateSystemScore {
        lang_pair: String,
        metric: String,
        system: String,
    },
}

#[derive(Default)]
struct Acc {
    sum: CompensatedSum,
    segments: usize,
    system_level: usize,
}

/// One system-level score per system for `metric` on `lang_pair`.
///
/// Segment scores are averaged with compensated summation; a single
/// system-level score is passed through unchanged. Within a metric every
/// system must use the same granularity.
pub fn system_level_scores(
    records: &[ScoreRecord],
    lang_pair: &str,
    metric: &str,
) -> Result<BTreeMap<String, f64>, AggregateError> {
    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.lang_pair() == lang_pair && r.metric_id() == metric)
    {
        let a = acc.entry(r.system_id()).or_default();
        a.sum.add(r.score());
        if r.is_segment_level() {
            a.segments += 1;
        } else {
            a.system_level += 1;
        }
    }

    let error = |system: &str, dup: bool| {
        let (lang_pair, metric, system) = (lang_pair.to_string(), metric.to_string(), system.to_string());
        if dup {
            AggregateError::DuplicateSystemScore {
                lang_pair,
                metric,
                system,
            }
        } else {
            AggregateError::MixedGranularity {
                lang_pair,
                metric,
                system,
            }
        }
    };
    let mut granularity: Option<bool> = None;
    let mut out = BTreeMap::new();
    for (system, a) in acc {
        if a.segments > 0 && a.system_level > 0 {
            return Err(error(system, false));
        }
        if a.system_level > 1 {
            return Err(error(system, true));
        }
        let segment_level = a.segments > 0;
        if *granularity.get_or_insert(segment_level) != segment_level {
            return Err(error(system, false));
        }
        let n = (a.segments + a.system_level) as f64;
        out.insert(system.to_string(), a.sum.total() / n);
    }
    Ok(out)
}
