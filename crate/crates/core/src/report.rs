//! Text and machine-readable renderings of rankings, selections, correlation
//! matrices and validation reports.
//!
//! Every renderer is a pure function of its inputs. Display values are rounded
//! half away from zero; JSON always carries full precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::analyze::CorrelationMatrix;
use crate::ingest::ValidationReport;
use crate::model::{MetricColumn, Orientation, RankingResult, SelectionResult, SystemMeta, SystemRanking};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Tsv,
    Json,
    Markdown,
}

impl FromStr for RenderFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(RenderFormat::Tsv),
            "json" => Ok(RenderFormat::Json),
            "markdown" | "md" => Ok(RenderFormat::Markdown),
            other => Err(format!("unknown output format `{other}`")),
        }
    }
}

/// Rounds half away from zero to `decimals` places.
pub fn display_round(value: f64, decimals: u8) -> String {
    let factor = 10f64.powi(i32::from(decimals));
    let rounded = (value * factor).round() / factor;
    // avoid printing "-0.0"
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:.prec$}", prec = usize::from(decimals))
}

/// Position of `value` within `[min, max]` on a 0–100 scale; a degenerate
/// column maps to 100.
pub fn render_gradient_cell(value: f64, min: f64, max: f64) -> f64 {
    if max <= min {
        return 100.0;
    }
    (100.0 * (value - min) / (max - min)).clamp(0.0, 100.0)
}

/// Optional inputs that add columns to a ranking table.
#[derive(Debug, Clone, Copy, Default)]
pub struct RankingContext<'a> {
    pub meta: Option<&'a [SystemMeta]>,
    pub selections: Option<&'a BTreeMap<String, SelectionResult>>,
    /// Annotate Markdown cells with a 0–100 gradient where 100 is the best
    /// value in the column.
    pub gradient: bool,
}

impl<'a> RankingContext<'a> {
    fn meta_for(&self, system: &str) -> Option<&'a SystemMeta> {
        self.meta?.iter().find(|m| m.system_id() == system)
    }

    fn humeval(&self, lang_pair: &str, system: &str) -> Option<bool> {
        self.selections?.get(lang_pair).map(|s| s.contains(system))
    }
}

fn bool_cell(value: Option<bool>, yes: &str, no: &str, unknown: &str) -> String {
    match value {
        Some(true) => yes.to_string(),
        Some(false) => no.to_string(),
        None => unknown.to_string(),
    }
}

fn params_cell(meta: Option<&SystemMeta>) -> String {
    meta.and_then(SystemMeta::params_billions)
        .map(|p| p.to_string())
        .unwrap_or_default()
}

/// Renders several rankings, in the order given.
pub fn render_rankings(results: &[RankingResult], ctx: &RankingContext, format: RenderFormat) -> String {
    match format {
        RenderFormat::Json => to_json(results),
        RenderFormat::Tsv => rankings_tsv(results, ctx),
        RenderFormat::Markdown => results
            .iter()
            .map(|r| ranking_markdown(r, ctx))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

pub fn render_ranking(result: &RankingResult, ctx: &RankingContext, format: RenderFormat) -> String {
    render_rankings(std::slice::from_ref(result), ctx, format)
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report types serialize");
    out.push('\n');
    out
}

fn tsv_line(fields: &[String]) -> String {
    let mut writer = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    writer.write_record(fields).expect("writing to memory");
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("fields are UTF-8")
}

fn rankings_tsv(results: &[RankingResult], ctx: &RankingContext) -> String {
    let mut columns: Vec<&MetricColumn> = Vec::new();
    for r in results {
        for c in &r.metrics {
            if !columns.iter().any(|k| k.metric_id == c.metric_id) {
                columns.push(c);
            }
        }
    }
    let mut header: Vec<String> = ["lang_pair", "system", "lp_supported", "params_b", "humeval", "autorank"]
        .map(String::from)
        .to_vec();
    header.extend(columns.iter().map(|c| c.metric_id.clone()));

    let mut out = tsv_line(&header);
    for r in results {
        for s in &r.per_system {
            let meta = ctx.meta_for(&s.system_id);
            let mut row = vec![
                r.lang_pair.clone(),
                s.system_id.clone(),
                bool_cell(
                    meta.and_then(|m| m.lp_supported().for_pair(&r.lang_pair)),
                    "true",
                    "false",
                    "",
                ),
                params_cell(meta),
                bool_cell(ctx.humeval(&r.lang_pair, &s.system_id), "true", "false", ""),
                display_round(s.autorank, 1),
            ];
            for c in &columns {
                let decimals = r
                    .metrics
                    .iter()
                    .find(|k| k.metric_id == c.metric_id)
                    .map(|k| k.decimals);
                row.push(match (decimals, s.system_scores.get(&c.metric_id)) {
                    (Some(d), Some(v)) => display_round(*v, d),
                    _ => String::new(),
                });
            }
            out.push_str(&tsv_line(&row));
        }
    }
    out
}

/// Column extremes of oriented values, so the gradient's 100 is always best.
fn oriented_range(result: &RankingResult, value: impl Fn(&SystemRanking) -> f64) -> (f64, f64) {
    result
        .per_system
        .iter()
        .map(value)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn with_gradient(text: String, oriented: f64, range: (f64, f64), enabled: bool) -> String {
    if enabled {
        format!("{text} ({:.0})", render_gradient_cell(oriented, range.0, range.1))
    } else {
        text
    }
}

fn escape_md(text: &str) -> String {
    text.replace('|', "\\|")
}

fn ranking_markdown(result: &RankingResult, ctx: &RankingContext) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "## {} ({}, {} systems)\n",
        result.lang_pair,
        result.rule.as_str(),
        result.n_systems
    );
    let with_meta = ctx.meta.is_some();
    let with_humeval = ctx.selections.is_some_and(|s| s.contains_key(&result.lang_pair));

    let mut header = vec!["System".to_string()];
    let mut align = vec![":---"];
    if with_meta {
        header.extend(["LP Supported".to_string(), "Params (B)".to_string()]);
        align.extend([":---:", "---:"]);
    }
    if with_humeval {
        header.push("Humeval".to_string());
        align.push(":---:");
    }
    header.push(format!("AutoRank {}", Orientation::LowerBetter.arrow()));
    align.push("---:");
    for c in &result.metrics {
        header.push(format!("{} {}", escape_md(&c.metric_id), c.orientation.arrow()));
        align.push("---:");
    }
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", align.join("|"));

    let rank_range = oriented_range(result, |s| -s.autorank);
    let metric_ranges: Vec<(f64, f64)> = result
        .metrics
        .iter()
        .map(|c| {
            let sign = orientation_sign(c.orientation);
            oriented_range(result, |s| sign * s.system_scores[&c.metric_id])
        })
        .collect();

    for s in &result.per_system {
        let meta = ctx.meta_for(&s.system_id);
        let mut cells = vec![escape_md(&s.system_id)];
        if with_meta {
            cells.push(bool_cell(
                meta.and_then(|m| m.lp_supported().for_pair(&result.lang_pair)),
                "✓",
                "✗",
                "?",
            ));
            let params = params_cell(meta);
            cells.push(if params.is_empty() { "?".to_string() } else { params });
        }
        if with_humeval {
            cells.push(bool_cell(ctx.humeval(&result.lang_pair, &s.system_id), "✓", "", ""));
        }
        cells.push(with_gradient(
            display_round(s.autorank, 1),
            -s.autorank,
            rank_range,
            ctx.gradient,
        ));
        for (c, range) in result.metrics.iter().zip(&metric_ranges) {
            let v = s.system_scores[&c.metric_id];
            cells.push(with_gradient(
                display_round(v, c.decimals),
                orientation_sign(c.orientation) * v,
                *range,
                ctx.gradient,
            ));
        }
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    out
}

fn orientation_sign(orientation: Orientation) -> f64 {
    match orientation {
        Orientation::HigherBetter => 1.0,
        Orientation::LowerBetter => -1.0,
    }
}

/// Selections as JSON, or as a `system<TAB>reason` listing per language pair.
pub fn render_selections(selections: &[SelectionResult], format: RenderFormat) -> String {
    if format == RenderFormat::Json {
        return to_json(selections);
    }
    let mut out = String::new();
    for (i, sel) in selections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "# {} ({} selected)", sel.lang_pair, sel.selected.len());
        out.push_str(&tsv_line(&["system".into(), "reason".into()]));
        for s in &sel.selected {
            out.push_str(&tsv_line(&[s.system_id.clone(), s.reason.as_str().into()]));
        }
    }
    out
}

/// Correlation matrices as JSON, or as CSV blocks with a
/// `lang_pair,metric,<metric ids...>` header each.
pub fn render_correlations(matrices: &[CorrelationMatrix], format: RenderFormat) -> String {
    if format == RenderFormat::Json {
        return to_json(matrices);
    }
    matrices.iter().map(correlation_csv).collect::<Vec<_>>().join("\n")
}

pub fn correlation_csv(matrix: &CorrelationMatrix) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["lang_pair".to_string(), "metric".to_string()];
    header.extend(matrix.metric_ids.iter().cloned());
    writer.write_record(&header).expect("writing to memory");
    for (metric, row) in matrix.metric_ids.iter().zip(&matrix.values) {
        let mut record = vec![matrix.lang_pair.clone(), metric.clone()];
        record.extend(row.iter().map(|v| v.map(|r| r.to_string()).unwrap_or_default()));
        writer.write_record(&record).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("fields are UTF-8")
}

pub fn render_validation(report: &ValidationReport, format: RenderFormat) -> String {
    if format == RenderFormat::Json {
        return to_json(report);
    }
    let mut out = String::new();
    for f in &report.findings {
        let level = if f.is_blocking() { "error" } else { "warning" };
        let _ = writeln!(out, "{level}: {f}");
    }
    out
}
