//! Parsing and validation of score files, system metadata and policies.
//!
//! Score files carry one score per row with the columns
//! `lang_pair, system, metric, segment_id, score` (CSV, TSV or JSON lines).
//! An empty `segment_id` marks a system-level score. Numbers are parsed with
//! a decimal point only; there is no locale handling and no thousands
//! separator.
//!
//! Policy files use a small line-oriented grammar:
//!
//! ```text
//! # comment
//! metric <id>: orientation=<higher|lower> kind=<reference_based|reference_free|surface> [decimals=<n>] [excluded_without_reference=<bool>]
//! <lang_pair>: rule=<standard|no_reference|low_resource|auto> metrics=[<id>, <id>, ...] [epsilon=<real>]
//! ```
//!
//! `rule=auto` picks `low_resource` for a single metric and `standard`
//! otherwise; every other rule must be spelled out.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    LangPairPolicy, LpSupport, MetricKind, MetricRegistry, MetricSpec, ModelError, Orientation, PolicyRule, ScoreKey,
    ScoreRecord, SystemMeta, DEFAULT_EPSILON,
};

const SCORE_COLUMNS: [&str; 5] = ["lang_pair", "system", "metric", "segment_id", "score"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: input is not valid UTF-8")]
    InvalidUtf8 { line: u64 },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: malformed row ({reason})")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: score is not finite")]
    NonFiniteScore { line: u64 },
    #[error("line {line}: invalid {column} `{value}`")]
    InvalidValue {
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("duplicate score for {0}")]
    DuplicateKey(ScoreKey),
    #[error("line {line}: unknown boolean `{value}`")]
    UnknownBoolean { line: u64, value: String },
    #[error("duplicate system `{0}`")]
    DuplicateSystem(String),
    #[error("line {line}: {message}")]
    PolicySyntax { line: u64, message: String },
    #[error("language pair {lang_pair}: low_resource requires exactly one metric, got {count}")]
    LowResourceMetricCount { lang_pair: String, count: usize },
    #[error("duplicate language pair `{0}`")]
    DuplicateLangPair(String),
    #[error("duplicate metric declaration `{0}`")]
    DuplicateMetric(String),
    #[error("line {line}: {source}")]
    Invalid { line: u64, source: ModelError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreFormat {
    Csv,
    Tsv,
    Jsonl,
}

impl ScoreFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(ScoreFormat::Csv),
            "tsv" | "tab" => Some(ScoreFormat::Tsv),
            "jsonl" | "ndjson" => Some(ScoreFormat::Jsonl),
            _ => None,
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            ScoreFormat::Tsv => b'\t',
            _ => b',',
        }
    }
}

impl FromStr for ScoreFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ScoreFormat::Csv),
            "tsv" => Ok(ScoreFormat::Tsv),
            "jsonl" => Ok(ScoreFormat::Jsonl),
            other => Err(format!("unknown score format `{other}`")),
        }
    }
}

fn csv_error(err: csv::Error) -> IngestError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => IngestError::Io(e),
        csv::ErrorKind::Utf8 { pos, .. } => IngestError::InvalidUtf8 {
            line: pos.map(|p| p.line()).unwrap_or(line),
        },
        other => IngestError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

fn csv_reader<R: Read>(input: R, delimiter: u8) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

/// Column name → position, tolerant of surrounding whitespace and a BOM.
fn header_index(headers: &csv::StringRecord) -> BTreeMap<String, usize> {
    headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim_start_matches('\u{feff}').trim().to_string(), i))
        .collect()
}

fn parse_score_value(raw: &str, line: u64) -> Result<f64, IngestError> {
    let raw = raw.trim();
    let value: f64 = raw.parse().map_err(|_| IngestError::InvalidValue {
        line,
        column: "score",
        value: raw.to_string(),
    })?;
    if !value.is_finite() {
        return Err(IngestError::NonFiniteScore { line });
    }
    Ok(value)
}

fn parse_segment_id(raw: &str, line: u64) -> Result<Option<u64>, IngestError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|_| IngestError::InvalidValue {
        line,
        column: "segment_id",
        value: raw.to_string(),
    })
}

fn build_record(
    line: u64,
    lang_pair: &str,
    system: &str,
    metric: &str,
    segment_id: Option<u64>,
    score: f64,
    seen: &mut HashSet<ScoreKey>,
) -> Result<ScoreRecord, IngestError> {
    let record = ScoreRecord::new(lang_pair, system, metric, segment_id, score)
        .map_err(|source| IngestError::Invalid { line, source })?;
    let key = record.key();
    if !seen.insert(key.clone()) {
        return Err(IngestError::DuplicateKey(key));
    }
    Ok(record)
}

/// Parses a score file, returning records in file order.
pub fn parse_scores<R: Read>(input: R, format: ScoreFormat) -> Result<Vec<ScoreRecord>, IngestError> {
    match format {
        ScoreFormat::Csv | ScoreFormat::Tsv => parse_delimited_scores(input, format.delimiter()),
        ScoreFormat::Jsonl => parse_jsonl_scores(input),
    }
}

fn parse_delimited_scores<R: Read>(input: R, delimiter: u8) -> Result<Vec<ScoreRecord>, IngestError> {
    let mut reader = csv_reader(input, delimiter);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let index = header_index(&headers);
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(SCORE_COLUMNS) {
        *slot = *index
            .get(name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
    }
    let [lp, sys, metric, seg, score] = cols;

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != headers.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} columns, found {}", headers.len(), row.len()),
            });
        }
        let segment_id = parse_segment_id(&row[seg], line)?;
        let value = parse_score_value(&row[score], line)?;
        records.push(build_record(
            line,
            &row[lp],
            &row[sys],
            &row[metric],
            segment_id,
            value,
            &mut seen,
        )?);
    }
    Ok(records)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonNumber {
    Number(f64),
    Text(String),
}

#[derive(Deserialize)]
struct JsonScore {
    lang_pair: String,
    system: String,
    metric: String,
    #[serde(default)]
    segment_id: Option<u64>,
    score: JsonNumber,
}

#[derive(Serialize)]
struct JsonScoreOut<'a> {
    lang_pair: &'a str,
    system: &'a str,
    metric: &'a str,
    segment_id: Option<u64>,
    score: f64,
}

fn parse_jsonl_scores<R: Read>(input: R) -> Result<Vec<ScoreRecord>, IngestError> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => IngestError::InvalidUtf8 { line: line_no },
            _ => IngestError::Io(e),
        })?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let row: JsonScore = serde_json::from_str(text).map_err(|e| IngestError::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        let score = match row.score {
            JsonNumber::Number(v) if v.is_finite() => v,
            JsonNumber::Number(_) => return Err(IngestError::NonFiniteScore { line: line_no }),
            JsonNumber::Text(s) => parse_score_value(&s, line_no)?,
        };
        records.push(build_record(
            line_no,
            &row.lang_pair,
            &row.system,
            &row.metric,
            row.segment_id,
            score,
            &mut seen,
        )?);
    }
    Ok(records)
}

/// Writes records in the same layout [`parse_scores`] reads.
///
/// Scores use Rust's shortest round-trip representation, so re-parsing yields
/// bit-identical values.
pub fn write_scores<W: Write>(records: &[ScoreRecord], format: ScoreFormat, mut out: W) -> Result<(), IngestError> {
    match format {
        ScoreFormat::Csv | ScoreFormat::Tsv => {
            let mut writer = csv::WriterBuilder::new().delimiter(format.delimiter()).from_writer(out);
            writer.write_record(SCORE_COLUMNS).map_err(csv_error)?;
            for r in records {
                let seg = r.segment_id().map(|s| s.to_string()).unwrap_or_default();
                let score = r.score().to_string();
                writer
                    .write_record([r.lang_pair(), r.system_id(), r.metric_id(), &seg, &score])
                    .map_err(csv_error)?;
            }
            writer.flush()?;
        }
        ScoreFormat::Jsonl => {
            for r in records {
                let row = JsonScoreOut {
                    lang_pair: r.lang_pair(),
                    system: r.system_id(),
                    metric: r.metric_id(),
                    segment_id: r.segment_id(),
                    score: r.score(),
                };
                serde_json::to_writer(&mut out, &row).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

/// Concatenates record sets from several files, rejecting keys that appear
/// in more than one of them.
pub fn merge_records(sets: Vec<Vec<ScoreRecord>>) -> Result<Vec<ScoreRecord>, IngestError> {
    let mut seen = HashSet::new();
    let mut merged = Vec::with_capacity(sets.iter().map(Vec::len).sum());
    for record in sets.into_iter().flatten() {
        let key = record.key();
        if !seen.insert(key.clone()) {
            return Err(IngestError::DuplicateKey(key));
        }
        merged.push(record);
    }
    Ok(merged)
}

fn parse_bool(raw: &str, line: u64) -> Result<bool, IngestError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(IngestError::UnknownBoolean {
            line,
            value: raw.trim().to_string(),
        }),
    }
}

fn parse_optional_bool(raw: &str, line: u64) -> Result<Option<bool>, IngestError> {
    let raw = raw.trim();
    if raw.is_empty() || raw == "?" {
        return Ok(None);
    }
    parse_bool(raw, line).map(Some)
}

/// `lp_supported` is either a single boolean or a `pair=bool;pair=bool`
/// list, where the pair `*` sets the default.
fn parse_lp_support(raw: &str, line: u64) -> Result<LpSupport, IngestError> {
    let raw = raw.trim();
    if !raw.contains('=') {
        return Ok(LpSupport {
            default: parse_optional_bool(raw, line)?,
            per_pair: BTreeMap::new(),
        });
    }
    let mut support = LpSupport::default();
    for entry in raw.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (pair, value) = entry.split_once('=').ok_or_else(|| IngestError::InvalidValue {
            line,
            column: "lp_supported",
            value: entry.to_string(),
        })?;
        let value = parse_bool(value, line)?;
        match pair.trim() {
            "*" => support.default = Some(value),
            pair => {
                support.per_pair.insert(pair.to_string(), value);
            }
        }
    }
    Ok(support)
}

const META_COLUMNS: [&str; 6] = [
    "system",
    "constrained",
    "params_b",
    "open_weights",
    "collected",
    "lp_supported",
];

/// Parses system metadata (CSV or TSV, detected from the header line).
///
/// Only `system` and `constrained` are required columns. Unknown columns are
/// kept verbatim in [`SystemMeta::extras`].
pub fn parse_system_meta<R: Read>(mut input: R) -> Result<Vec<SystemMeta>, IngestError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
    let delimiter = if first_line.contains(&b'\t') { b'\t' } else { b',' };

    let mut reader = csv_reader(bytes.as_slice(), delimiter);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let index = header_index(&headers);
    for required in ["system", "constrained"] {
        if !index.contains_key(required) {
            return Err(IngestError::MissingColumn(required.to_string()));
        }
    }
    let extra_columns: Vec<(String, usize)> = index
        .iter()
        .filter(|(name, _)| !META_COLUMNS.contains(&name.as_str()))
        .map(|(name, &i)| (name.clone(), i))
        .collect();

    let mut seen = BTreeSet::new();
    let mut metas = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != headers.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} columns, found {}", headers.len(), row.len()),
            });
        }
        let cell = |name: &str| index.get(name).map(|&i| &row[i]).unwrap_or("");
        let invalid = |source| IngestError::Invalid { line, source };

        let params = match cell("params_b").trim() {
            "" | "?" => None,
            raw => Some(raw.parse::<f64>().map_err(|_| IngestError::InvalidValue {
                line,
                column: "params_b",
                value: raw.to_string(),
            })?),
        };
        let mut meta = SystemMeta::new(cell("system"), parse_bool(cell("constrained"), line)?)
            .map_err(invalid)?
            .with_params_billions(params)
            .map_err(invalid)?
            .with_open_weights(parse_optional_bool(cell("open_weights"), line)?)
            .with_organizer_collected(parse_optional_bool(cell("collected"), line)?.unwrap_or(false))
            .with_lp_supported(parse_lp_support(cell("lp_supported"), line)?);
        for (name, i) in &extra_columns {
            meta = meta.with_extra(name, &row[*i]);
        }
        if !seen.insert(meta.system_id().to_string()) {
            return Err(IngestError::DuplicateSystem(meta.system_id().to_string()));
        }
        metas.push(meta);
    }
    Ok(metas)
}

/// Language-pair policies together with the metric registry they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub policies: Vec<LangPairPolicy>,
    pub registry: MetricRegistry,
}

impl PolicyConfig {
    pub fn new(policies: Vec<LangPairPolicy>, registry: MetricRegistry) -> Self {
        Self { policies, registry }
    }

    /// One `standard` policy per language pair covering every metric that
    /// occurs in the scores.
    pub fn from_scores(records: &[ScoreRecord], registry: MetricRegistry) -> Self {
        let mut metrics: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in records {
            metrics.entry(r.lang_pair()).or_default().insert(r.metric_id());
        }
        let policies = metrics
            .into_iter()
            .map(|(lp, ms)| {
                LangPairPolicy::new(
                    lp,
                    PolicyRule::Standard,
                    ms.into_iter().map(str::to_string).collect(),
                    DEFAULT_EPSILON,
                )
                .expect("identifiers come from validated records")
            })
            .collect();
        Self { policies, registry }
    }

    pub fn get(&self, lang_pair: &str) -> Option<&LangPairPolicy> {
        self.policies.iter().find(|p| p.lang_pair() == lang_pair)
    }

    pub fn lang_pairs(&self) -> BTreeSet<&str> {
        self.policies.iter().map(LangPairPolicy::lang_pair).collect()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, ModelError> {
        let policies = self
            .policies
            .iter()
            .map(|p| p.with_epsilon(epsilon))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            policies,
            registry: self.registry.clone(),
        })
    }
}

fn syntax(line: u64, message: impl Into<String>) -> IngestError {
    IngestError::PolicySyntax {
        line,
        message: message.into(),
    }
}

/// Splits `key=value key=[a, b]` into pairs.
fn parse_assignments(text: &str, line: u64) -> Result<BTreeMap<String, String>, IngestError> {
    let mut out = BTreeMap::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        let eq = rest
            .find('=')
            .ok_or_else(|| syntax(line, format!("expected key=value near `{rest}`")))?;
        let key = rest[..eq].trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(syntax(line, format!("bad key near `{rest}`")));
        }
        let after = rest[eq + 1..].trim_start();
        let (value, remaining) = if let Some(list) = after.strip_prefix('[') {
            let close = list
                .find(']')
                .ok_or_else(|| syntax(line, format!("unterminated list for `{key}`")))?;
            (&after[..close + 2], &list[close + 1..])
        } else {
            let end = after.find(char::is_whitespace).unwrap_or(after.len());
            (&after[..end], &after[end..])
        };
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(syntax(line, format!("`{key}` given twice")));
        }
        rest = remaining.trim_start();
    }
    Ok(out)
}

fn parse_list(value: &str, line: u64) -> Result<Vec<String>, IngestError> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .ok_or_else(|| syntax(line, format!("expected [..] list, got `{value}`")))?;
    Ok(inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect())
}

fn parse_metric_decl(head: &str, body: &str, line: u64) -> Result<MetricSpec, IngestError> {
    let mut fields = parse_assignments(body, line)?;
    let orientation = match fields.remove("orientation").as_deref() {
        Some("higher") | Some("higher_better") => Orientation::HigherBetter,
        Some("lower") | Some("lower_better") => Orientation::LowerBetter,
        Some(other) => return Err(syntax(line, format!("unknown orientation `{other}`"))),
        None => return Err(syntax(line, format!("metric {head}: missing orientation"))),
    };
    let kind = match fields.remove("kind").as_deref() {
        Some("reference_based") => MetricKind::ReferenceBased,
        Some("reference_free") => MetricKind::ReferenceFree,
        Some("surface") => MetricKind::Surface,
        Some(other) => return Err(syntax(line, format!("unknown kind `{other}`"))),
        None => return Err(syntax(line, format!("metric {head}: missing kind"))),
    };
    let mut spec = MetricSpec::new(head, orientation, kind).map_err(|source| IngestError::Invalid { line, source })?;
    if let Some(d) = fields.remove("decimals") {
        let decimals = d.parse().map_err(|_| syntax(line, format!("bad decimals `{d}`")))?;
        spec = spec.with_decimals(decimals);
    }
    if let Some(flag) = fields.remove("excluded_without_reference") {
        spec = spec.excluded_without_reference(parse_bool(&flag, line)?);
    }
    if let Some(key) = fields.keys().next() {
        return Err(syntax(line, format!("unknown metric field `{key}`")));
    }
    Ok(spec)
}

fn parse_lang_pair_decl(head: &str, body: &str, line: u64) -> Result<LangPairPolicy, IngestError> {
    let mut fields = parse_assignments(body, line)?;
    let metrics = match fields.remove("metrics") {
        Some(v) => parse_list(&v, line)?,
        None => return Err(syntax(line, format!("{head}: missing metrics"))),
    };
    let rule = match fields.remove("rule").as_deref() {
        Some("standard") => PolicyRule::Standard,
        Some("no_reference") => PolicyRule::NoReference,
        Some("low_resource") => PolicyRule::LowResource,
        Some("auto") if metrics.len() == 1 => PolicyRule::LowResource,
        Some("auto") => PolicyRule::Standard,
        Some(other) => return Err(syntax(line, format!("unknown rule `{other}`"))),
        None => return Err(syntax(line, format!("{head}: rule must be stated"))),
    };
    let epsilon = match fields.remove("epsilon") {
        Some(e) => e
            .parse::<f64>()
            .map_err(|_| syntax(line, format!("bad epsilon `{e}`")))?,
        None => DEFAULT_EPSILON,
    };
    if let Some(key) = fields.keys().next() {
        return Err(syntax(line, format!("unknown field `{key}`")));
    }
    if rule == PolicyRule::LowResource && metrics.len() != 1 {
        return Err(IngestError::LowResourceMetricCount {
            lang_pair: head.to_string(),
            count: metrics.len(),
        });
    }
    LangPairPolicy::new(head, rule, metrics, epsilon).map_err(|source| IngestError::Invalid { line, source })
}

/// Parses a policy file on top of the built-in metric registry.
pub fn parse_policy<R: Read>(mut input: R) -> Result<PolicyConfig, IngestError> {
    let mut text = String::new();
    input
        .read_to_string(&mut text)
        .map_err(|_| IngestError::InvalidUtf8 { line: 0 })?;

    let mut registry = MetricRegistry::builtin();
    let mut declared = BTreeSet::new();
    let mut policies: Vec<(u64, LangPairPolicy)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        let content = raw.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        let (head, body) = content
            .split_once(':')
            .ok_or_else(|| syntax(line, "expected `<name>: key=value ...`"))?;
        let head = head.trim();
        if let Some(metric) = head.strip_prefix("metric ") {
            let spec = parse_metric_decl(metric.trim(), body, line)?;
            if !declared.insert(spec.metric_id().to_string()) {
                return Err(IngestError::DuplicateMetric(spec.metric_id().to_string()));
            }
            registry.insert(spec);
        } else {
            let policy = parse_lang_pair_decl(head, body, line)?;
            if policies.iter().any(|(_, p)| p.lang_pair() == policy.lang_pair()) {
                return Err(IngestError::DuplicateLangPair(policy.lang_pair().to_string()));
            }
            policies.push((line, policy));
        }
    }
    for (line, policy) in &policies {
        policy
            .check_metrics(&registry)
            .map_err(|source| IngestError::Invalid { line: *line, source })?;
    }
    Ok(PolicyConfig {
        policies: policies.into_iter().map(|(_, p)| p).collect(),
        registry,
    })
}

/// One observation about a dataset. Blocking findings make a language pair
/// unrankable; the rest are informational.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    NoPolicy {
        lang_pair: String,
    },
    UnknownMetric {
        lang_pair: String,
        metric: String,
    },
    MissingMetric {
        lang_pair: String,
        system: String,
        metric: String,
    },
    MixedGranularity {
        lang_pair: String,
        system: String,
        metric: String,
    },
    MissingMeta {
        lang_pair: String,
        system: String,
    },
    /// Scores for a metric outside the policy; ranking ignores them.
    ExtraMetric {
        lang_pair: String,
        metric: String,
    },
}

impl Finding {
    pub fn lang_pair(&self) -> &str {
        match self {
            Finding::NoPolicy { lang_pair }
            | Finding::UnknownMetric { lang_pair, .. }
            | Finding::MissingMetric { lang_pair, .. }
            | Finding::MixedGranularity { lang_pair, .. }
            | Finding::MissingMeta { lang_pair, .. }
            | Finding::ExtraMetric { lang_pair, .. } => lang_pair,
        }
    }

    pub fn is_blocking(&self) -> bool {
        !matches!(self, Finding::ExtraMetric { .. })
    }

    /// The system this finding is about, if it concerns a single system.
    pub fn system(&self) -> Option<&str> {
        match self {
            Finding::MissingMetric { system, .. }
            | Finding::MixedGranularity { system, .. }
            | Finding::MissingMeta { system, .. } => Some(system),
            _ => None,
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::NoPolicy { lang_pair } => write!(f, "{lang_pair}: no policy for language pair"),
            Finding::UnknownMetric { lang_pair, metric } => {
                write!(f, "{lang_pair}: metric {metric} has no specification")
            }
            Finding::MissingMetric {
                lang_pair,
                system,
                metric,
            } => write!(f, "{lang_pair}: system {system} has no scores for {metric}"),
            Finding::MixedGranularity {
                lang_pair,
                system,
                metric,
            } => write!(
                f,
                "{lang_pair}: {metric} mixes segment- and system-level scores (system {system})"
            ),
            Finding::MissingMeta { lang_pair, system } => {
                write!(f, "{lang_pair}: system {system} has no metadata")
            }
            Finding::ExtraMetric { lang_pair, metric } => {
                write!(f, "{lang_pair}: metric {metric} is not in the policy and is ignored")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn is_rankable(&self) -> bool {
        !self.findings.iter().any(Finding::is_blocking)
    }

    pub fn blocking(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.is_blocking())
    }

    pub fn for_lang_pair(&self, lang_pair: &str) -> ValidationReport {
        ValidationReport {
            findings: self
                .findings
                .iter()
                .filter(|f| f.lang_pair() == lang_pair)
                .cloned()
                .collect(),
        }
    }

    /// Systems that a blocking finding pins to a single system.
    pub fn offending_systems(&self, lang_pair: &str) -> BTreeSet<String> {
        self.findings
            .iter()
            .filter(|f| f.is_blocking() && f.lang_pair() == lang_pair)
            .filter_map(|f| f.system().map(str::to_string))
            .collect()
    }
}

#[derive(Default)]
struct MetricCells<'a> {
    segment: BTreeSet<&'a str>,
    system: BTreeSet<&'a str>,
}

/// Cross-checks scores, metadata and policies.
///
/// `meta == None` skips the metadata checks.
pub fn validate_dataset(
    scores: &[ScoreRecord],
    meta: Option<&[SystemMeta]>,
    policies: &PolicyConfig,
) -> ValidationReport {
    // lang pair -> metric -> granularity -> systems
    let mut by_lp: BTreeMap<&str, BTreeMap<&str, MetricCells>> = BTreeMap::new();
    let mut systems: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in scores {
        let cells = by_lp
            .entry(r.lang_pair())
            .or_default()
            .entry(r.metric_id())
            .or_default();
        if r.is_segment_level() {
            cells.segment.insert(r.system_id());
        } else {
            cells.system.insert(r.system_id());
        }
        systems.entry(r.lang_pair()).or_default().insert(r.system_id());
    }
    let known_meta: Option<BTreeSet<&str>> = meta.map(|m| m.iter().map(SystemMeta::system_id).collect());

    let mut findings = Vec::new();
    for (lp, metrics) in &by_lp {
        let lp_systems = &systems[lp];
        let Some(policy) = policies.get(lp) else {
            findings.push(Finding::NoPolicy {
                lang_pair: lp.to_string(),
            });
            continue;
        };
        for metric in policy.metric_ids() {
            if !policies.registry.contains(metric) {
                findings.push(Finding::UnknownMetric {
                    lang_pair: lp.to_string(),
                    metric: metric.clone(),
                });
            }
            let cells = metrics.get(metric.as_str());
            for system in lp_systems {
                let present = cells.is_some_and(|c| c.segment.contains(system) || c.system.contains(system));
                if !present {
                    findings.push(Finding::MissingMetric {
                        lang_pair: lp.to_string(),
                        system: system.to_string(),
                        metric: metric.clone(),
                    });
                }
            }
            if let Some(cells) = cells {
                for system in mixed_systems(cells) {
                    findings.push(Finding::MixedGranularity {
                        lang_pair: lp.to_string(),
                        system: system.to_string(),
                        metric: metric.clone(),
                    });
                }
            }
        }
        for metric in metrics.keys() {
            if !policy.metric_ids().iter().any(|m| m == metric) {
                findings.push(Finding::ExtraMetric {
                    lang_pair: lp.to_string(),
                    metric: metric.to_string(),
                });
            }
        }
        if let Some(known) = &known_meta {
            for system in lp_systems.iter().filter(|s| !known.contains(*s)) {
                findings.push(Finding::MissingMeta {
                    lang_pair: lp.to_string(),
                    system: system.to_string(),
                });
            }
        }
    }
    findings.sort();
    findings.dedup();
    ValidationReport { findings }
}

/// Systems whose granularity conflicts: those with both kinds of rows, plus
/// the minority group when systems disagree with each other.
fn mixed_systems<'a>(cells: &MetricCells<'a>) -> BTreeSet<&'a str> {
    let both: BTreeSet<&str> = cells.segment.intersection(&cells.system).copied().collect();
    let only_segment: BTreeSet<&str> = cells.segment.difference(&both).copied().collect();
    let only_system: BTreeSet<&str> = cells.system.difference(&both).copied().collect();
    let mut out = both;
    if !only_segment.is_empty() && !only_system.is_empty() {
        if only_segment.len() < only_system.len() {
            out.extend(only_segment);
        } else {
            out.extend(only_system);
        }
    }
    out
}

/// Removes every record of `systems` on `lang_pair`.
pub fn drop_systems(records: &[ScoreRecord], lang_pair: &str, systems: &BTreeSet<String>) -> Vec<ScoreRecord> {
    records
        .iter()
        .filter(|r| !(r.lang_pair() == lang_pair && systems.contains(r.system_id())))
        .cloned()
        .collect()
}
