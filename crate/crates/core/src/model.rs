//! Domain types shared by every stage of the pipeline.
//!
//! Types with invariants are built through validating constructors; a
//! violation yields a [`ModelError`] naming the offending field. All values are
//! immutable once built and can be shared freely across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default floor for the interpercentile spread, in oriented-score units.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Constrained systems admitted first during human-evaluation selection.
pub const DEFAULT_K_CONSTRAINED: usize = 8;
/// Target size of the human-evaluation subset.
pub const DEFAULT_TOTAL: usize = 18;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl ModelError {
    pub fn field(&self) -> &'static str {
        match self {
            ModelError::Invalid { field, .. } => field,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Trims an identifier and rejects empty results.
pub fn identifier(field: &'static str, raw: &str) -> Result<String, ModelError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    Ok(trimmed.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl Orientation {
    pub fn arrow(self) -> &'static str {
        match self {
            Orientation::HigherBetter => "↑",
            Orientation::LowerBetter => "↓",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    ReferenceBased,
    ReferenceFree,
    Surface,
}

/// Static description of one automatic metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    metric_id: String,
    orientation: Orientation,
    kind: MetricKind,
    /// Decimal places used when displaying this metric's scores.
    decimals: u8,
    /// Pure QE metric that is dropped for language pairs without references.
    excluded_without_reference: bool,
}

impl MetricSpec {
    pub fn new(metric_id: &str, orientation: Orientation, kind: MetricKind) -> Result<Self, ModelError> {
        Ok(Self {
            metric_id: identifier("metric_id", metric_id)?,
            orientation,
            kind,
            decimals: 3,
            excluded_without_reference: false,
        })
    }

    pub fn with_decimals(mut self, decimals: u8) -> Self {
        self.decimals = decimals;
        self
    }

    pub fn excluded_without_reference(mut self, excluded: bool) -> Self {
        self.excluded_without_reference = excluded;
        self
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn decimals(&self) -> u8 {
        self.decimals
    }

    pub fn is_excluded_without_reference(&self) -> bool {
        self.excluded_without_reference
    }
}

/// Metric specifications keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRegistry {
    specs: BTreeMap<String, MetricSpec>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The WMT25 metric set: the two GEMBA-ESA judges, MetricX-24, XCOMET,
    /// CometKiwi and chrF++.
    pub fn builtin() -> Self {
        use MetricKind::*;
        use Orientation::*;
        let specs = [
            ("CometKiwi-XL", HigherBetter, ReferenceFree, 3, true),
            ("GEMBA-ESA-CMDA", HigherBetter, ReferenceFree, 1, false),
            ("GEMBA-ESA-GPT4.1", HigherBetter, ReferenceFree, 1, false),
            ("MetricX-24-Hybrid-XL", LowerBetter, ReferenceBased, 1, false),
            ("XCOMET-XL", HigherBetter, ReferenceBased, 3, false),
            ("chrF++", HigherBetter, Surface, 1, false),
        ];
        let mut registry = Self::default();
        for (id, orientation, kind, decimals, excluded) in specs {
            let spec = MetricSpec::new(id, orientation, kind)
                .expect("builtin metric ids are non-empty")
                .with_decimals(decimals)
                .excluded_without_reference(excluded);
            registry.insert(spec);
        }
        registry
    }

    /// Adds a spec, replacing any previous spec with the same id.
    pub fn insert(&mut self, spec: MetricSpec) -> Option<MetricSpec> {
        self.specs.insert(spec.metric_id.clone(), spec)
    }

    pub fn get(&self, metric_id: &str) -> Option<&MetricSpec> {
        self.specs.get(metric_id)
    }

    pub fn contains(&self, metric_id: &str) -> bool {
        self.specs.contains_key(metric_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetricSpec> {
        self.specs.values()
    }
}

/// Unique key of a score within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScoreKey {
    pub lang_pair: String,
    pub system_id: String,
    pub metric_id: String,
    pub segment_id: Option<u64>,
}

impl fmt::Display for ScoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, ", self.lang_pair, self.system_id, self.metric_id)?;
        match self.segment_id {
            Some(seg) => write!(f, "{seg})"),
            None => write!(f, "system)"),
        }
    }
}

/// One metric score for one system on one language pair.
///
/// `segment_id == None` marks an already aggregated system-level score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    lang_pair: String,
    system_id: String,
    metric_id: String,
    segment_id: Option<u64>,
    score: f64,
}

impl ScoreRecord {
    pub fn new(
        lang_pair: &str,
        system_id: &str,
        metric_id: &str,
        segment_id: Option<u64>,
        score: f64,
    ) -> Result<Self, ModelError> {
        if !score.is_finite() {
            return Err(invalid("score", format!("{score} is not finite")));
        }
        Ok(Self {
            lang_pair: identifier("lang_pair", lang_pair)?,
            system_id: identifier("system_id", system_id)?,
            metric_id: identifier("metric_id", metric_id)?,
            segment_id,
            score,
        })
    }

    pub fn lang_pair(&self) -> &str {
        &self.lang_pair
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    pub fn segment_id(&self) -> Option<u64> {
        self.segment_id
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn is_segment_level(&self) -> bool {
        self.segment_id.is_some()
    }

    pub fn key(&self) -> ScoreKey {
        ScoreKey {
            lang_pair: self.lang_pair.clone(),
            system_id: self.system_id.clone(),
            metric_id: self.metric_id.clone(),
            segment_id: self.segment_id,
        }
    }
}

/// Whether a system officially supports a language pair.
///
/// A blanket `default` applies to every pair without an explicit entry;
/// `None` everywhere means unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpSupport {
    pub default: Option<bool>,
    pub per_pair: BTreeMap<String, bool>,
}

impl LpSupport {
    pub fn for_pair(&self, lang_pair: &str) -> Option<bool> {
        self.per_pair.get(lang_pair).copied().or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMeta {
    system_id: String,
    constrained: bool,
    params_billions: Option<f64>,
    open_weights: Option<bool>,
    organizer_collected: bool,
    lp_supported: LpSupport,
    /// Columns of the metadata file this crate does not interpret.
    extras: BTreeMap<String, String>,
}

impl SystemMeta {
    pub fn new(system_id: &str, constrained: bool) -> Result<Self, ModelError> {
        Ok(Self {
            system_id: identifier("system_id", system_id)?,
            constrained,
            params_billions: None,
            open_weights: None,
            organizer_collected: false,
            lp_supported: LpSupport::default(),
            extras: BTreeMap::new(),
        })
    }

    pub fn with_params_billions(mut self, params: Option<f64>) -> Result<Self, ModelError> {
        if let Some(p) = params {
            if !p.is_finite() || p < 0.0 {
                return Err(invalid("params_billions", format!("{p} is not a non-negative real")));
            }
        }
        self.params_billions = params;
        Ok(self)
    }

    pub fn with_open_weights(mut self, open: Option<bool>) -> Self {
        self.open_weights = open;
        self
    }

    pub fn with_organizer_collected(mut self, collected: bool) -> Self {
        self.organizer_collected = collected;
        self
    }

    pub fn with_lp_supported(mut self, support: LpSupport) -> Self {
        self.lp_supported = support;
        self
    }

    pub fn with_extra(mut self, key: &str, value: &str) -> Self {
        self.extras.insert(key.to_string(), value.to_string());
        self
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn constrained(&self) -> bool {
        self.constrained
    }

    pub fn params_billions(&self) -> Option<f64> {
        self.params_billions
    }

    pub fn open_weights(&self) -> Option<bool> {
        self.open_weights
    }

    pub fn organizer_collected(&self) -> bool {
        self.organizer_collected
    }

    pub fn lp_supported(&self) -> &LpSupport {
        &self.lp_supported
    }

    pub fn extras(&self) -> &BTreeMap<String, String> {
        &self.extras
    }
}

/// Which exception, if any, governs a language pair's metric set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyRule {
    Standard,
    /// No human references: the pure QE metric is dropped.
    NoReference,
    /// A single surface metric carries the whole ranking.
    LowResource,
}

impl PolicyRule {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyRule::Standard => "standard",
            PolicyRule::NoReference => "no_reference",
            PolicyRule::LowResource => "low_resource",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangPairPolicy {
    lang_pair: String,
    rule: PolicyRule,
    metric_ids: Vec<String>,
    epsilon: f64,
}

impl LangPairPolicy {
    pub fn new(lang_pair: &str, rule: PolicyRule, metric_ids: Vec<String>, epsilon: f64) -> Result<Self, ModelError> {
        let lang_pair = identifier("lang_pair", lang_pair)?;
        let metric_ids = metric_ids
            .iter()
            .map(|m| identifier("metric_ids", m))
            .collect::<Result<Vec<_>, _>>()?;
        if metric_ids.is_empty() {
            return Err(invalid("metric_ids", "at least one metric is required"));
        }
        let mut seen = BTreeSet::new();
        for m in &metric_ids {
            if !seen.insert(m.as_str()) {
                return Err(invalid("metric_ids", format!("metric {m} listed twice")));
            }
        }
        if rule == PolicyRule::LowResource && metric_ids.len() != 1 {
            return Err(invalid(
                "metric_ids",
                format!("low_resource requires exactly one metric, got {}", metric_ids.len()),
            ));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("{epsilon} is not a positive real")));
        }
        Ok(Self {
            lang_pair,
            rule,
            metric_ids,
            epsilon,
        })
    }

    /// Checks the metric set against the registry's QE-exclusion flags.
    pub fn check_metrics(&self, registry: &MetricRegistry) -> Result<(), ModelError> {
        if self.rule == PolicyRule::NoReference {
            if let Some(m) = self
                .metric_ids
                .iter()
                .find(|m| registry.get(m).is_some_and(MetricSpec::is_excluded_without_reference))
            {
                return Err(invalid(
                    "metric_ids",
                    format!("{m} is excluded for language pairs without references"),
                ));
            }
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, ModelError> {
        Self::new(&self.lang_pair, self.rule, self.metric_ids.clone(), epsilon)
    }

    pub fn lang_pair(&self) -> &str {
        &self.lang_pair
    }

    pub fn rule(&self) -> PolicyRule {
        self.rule
    }

    pub fn metric_ids(&self) -> &[String] {
        &self.metric_ids
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Location and spread of one metric's system-level scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustStats {
    pub median: f64,
    pub q25: f64,
    pub q100: f64,
    /// `max(epsilon, q100 - q25)`
    pub spread: f64,
}

/// Per-metric column information carried alongside a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricColumn {
    pub metric_id: String,
    pub orientation: Orientation,
    pub decimals: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRanking {
    pub system_id: String,
    /// System-level scores in metric-native units.
    pub system_scores: BTreeMap<String, f64>,
    pub robust_scores: BTreeMap<String, f64>,
    pub mean_robust: f64,
    pub autorank: f64,
}

/// AutoRank for one language pair. `per_system` is sorted by ascending
/// AutoRank, ties broken by system id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub lang_pair: String,
    pub rule: PolicyRule,
    pub epsilon: f64,
    pub n_systems: usize,
    pub metrics: Vec<MetricColumn>,
    pub per_system: Vec<SystemRanking>,
    pub per_metric_stats: BTreeMap<String, RobustStats>,
}

impl RankingResult {
    pub fn get(&self, system_id: &str) -> Option<&SystemRanking> {
        self.per_system.iter().find(|s| s.system_id == system_id)
    }

    pub fn autoranks(&self) -> BTreeMap<String, f64> {
        self.per_system
            .iter()
            .map(|s| (s.system_id.clone(), s.autorank))
            .collect()
    }

    /// Re-checks the structural invariants, e.g. after deserializing.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_systems == 0 || self.per_system.len() != self.n_systems {
            return Err(invalid(
                "n_systems",
                format!(
                    "{} does not match {} ranked systems",
                    self.n_systems,
                    self.per_system.len()
                ),
            ));
        }
        let n = self.n_systems as f64;
        let mut ids = BTreeSet::new();
        for s in &self.per_system {
            if !ids.insert(s.system_id.as_str()) {
                return Err(invalid("per_system", format!("duplicate system {}", s.system_id)));
            }
            if !(s.autorank.is_finite() && (1.0..=n).contains(&s.autorank)) {
                return Err(invalid(
                    "autorank",
                    format!("{} for {} outside [1, {n}]", s.autorank, s.system_id),
                ));
            }
        }
        for pair in self.per_system.windows(2) {
            if pair[0].autorank > pair[1].autorank || pair[0].mean_robust < pair[1].mean_robust {
                return Err(invalid("per_system", "not sorted by ascending autorank"));
            }
        }
        for (metric, stats) in &self.per_metric_stats {
            if stats.spread < self.epsilon {
                return Err(invalid("spread", format!("{metric} spread below epsilon")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionReason {
    TopConstrained,
    FillTop,
}

impl SelectionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionReason::TopConstrained => "top_constrained",
            SelectionReason::FillTop => "fill_top",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedSystem {
    pub system_id: String,
    pub autorank: f64,
    pub constrained: bool,
    pub reason: SelectionReason,
}

/// Human-evaluation subset, ordered by ascending AutoRank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub lang_pair: String,
    pub selected: Vec<SelectedSystem>,
    pub k_constrained: usize,
    pub total: usize,
}

impl SelectionResult {
    pub fn contains(&self, system_id: &str) -> bool {
        self.selected.iter().any(|s| s.system_id == system_id)
    }

    pub fn system_ids(&self) -> Vec<&str> {
        self.selected.iter().map(|s| s.system_id.as_str()).collect()
    }

    /// Checks the invariants against the size of the ranked pool.
    pub fn validate(&self, n_systems: usize) -> Result<(), ModelError> {
        if self.selected.len() != self.total.min(n_systems) {
            return Err(invalid(
                "selected",
                format!(
                    "expected {} systems, got {}",
                    self.total.min(n_systems),
                    self.selected.len()
                ),
            ));
        }
        let mut ids = BTreeSet::new();
        for s in &self.selected {
            if !ids.insert(s.system_id.as_str()) {
                return Err(invalid("selected", format!("duplicate system {}", s.system_id)));
            }
            if s.reason == SelectionReason::TopConstrained && !s.constrained {
                return Err(invalid(
                    "reason",
                    format!("{} is unconstrained but marked top_constrained", s.system_id),
                ));
            }
        }
        Ok(())
    }
}
