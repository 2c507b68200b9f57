//! Human-evaluation subset selection.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{RankingResult, SelectedSystem, SelectionReason, SelectionResult, SystemMeta};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectError {
    #[error("system {0} has no metadata")]
    MissingMeta(String),
    #[error("k_constrained ({k}) exceeds total ({total})")]
    KExceedsTotal { k: usize, total: usize },
}

/// Picks up to `total` systems: first the `k_constrained` best constrained
/// systems, then the best of everything left.
///
/// Systems are compared by ascending AutoRank, ties by system id. The result
/// lists the chosen systems in that same order.
pub fn select_for_humeval(
    ranking: &RankingResult,
    meta: &[SystemMeta],
    k_constrained: usize,
    total: usize,
) -> Result<SelectionResult, SelectError> {
    if k_constrained > total {
        return Err(SelectError::KExceedsTotal {
            k: k_constrained,
            total,
        });
    }
    let by_id: BTreeMap<&str, &SystemMeta> = meta.iter().map(|m| (m.system_id(), m)).collect();
    let mut pool = Vec::with_capacity(ranking.per_system.len());
    for s in &ranking.per_system {
        let m = by_id
            .get(s.system_id.as_str())
            .ok_or_else(|| SelectError::MissingMeta(s.system_id.clone()))?;
        pool.push((s.system_id.as_str(), s.autorank, m.constrained()));
    }
    pool.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));

    let mut reasons: Vec<Option<SelectionReason>> = vec![None; pool.len()];
    let constrained = pool.iter().enumerate().filter(|(_, s)| s.2).map(|(i, _)| i);
    for i in constrained.take(k_constrained) {
        reasons[i] = Some(SelectionReason::TopConstrained);
    }
    let mut remaining = total.min(pool.len()) - reasons.iter().flatten().count();
    for reason in reasons.iter_mut().filter(|r| r.is_none()) {
        if remaining == 0 {
            break;
        }
        *reason = Some(SelectionReason::FillTop);
        remaining -= 1;
    }

    let selected = pool
        .iter()
        .zip(&reasons)
        .filter_map(|(&(id, autorank, constrained), reason)| {
            reason.map(|reason| SelectedSystem {
                system_id: id.to_string(),
                autorank,
                constrained,
                reason,
            })
        })
        .collect();
    Ok(SelectionResult {
        lang_pair: ranking.lang_pair.clone(),
        selected,
        k_constrained,
        total,
    })
}
