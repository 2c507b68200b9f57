//! Robust multi-metric ranking of machine translation systems.
//!
//! The pipeline consumes precomputed metric scores (segment- or system-level),
//! and turns them into an AutoRank per language pair:
//!
//! 1. [`aggregate`] averages segment scores into one system-level score per metric.
//! 2. [`autorank`] orients every metric so that higher is better, applies
//!    median–interpercentile scaling `z = (x - median) / max(eps, Q100 - Q25)`,
//!    averages the scaled values with equal weights and maps the averages
//!    linearly onto `1..=N` (1 is best).
//! 3. [`select`] picks the human-evaluation subset: the best constrained systems
//!    first, then the best of the remaining pool.
//! 4. [`analyze`] measures agreement between metrics with pooled Pearson
//!    correlations over segment scores.
//! 5. [`report`] renders rankings, selections and correlation matrices.
//!
//! Input parsing and validation lives in [`ingest`]; the command-line front end
//! in [`cli`].
//!
//! ```
//! use std::collections::BTreeMap;
//! use wmt_autorank::autorank::remap_to_rank;
//!
//! let mean: BTreeMap<String, f64> =
//!     [("A".to_string(), 2.0), ("B".to_string(), 0.0)].into_iter().collect();
//! let ranks = remap_to_rank(&mean).unwrap();
//! assert_eq!(ranks["A"], 1.0);
//! assert_eq!(ranks["B"], 2.0);
//! ```

pub mod aggregate;
pub mod analyze;
pub mod autorank;
pub mod cli;
pub mod ingest;
pub mod model;
mod numeric;
pub mod report;
pub mod select;

pub use autorank::rank_language_pair;
pub use model::{
    LangPairPolicy, MetricKind, MetricRegistry, MetricSpec, Orientation, PolicyRule, RankingResult, ScoreRecord,
    SelectionResult, SystemMeta,
};
pub use select::select_for_humeval;
