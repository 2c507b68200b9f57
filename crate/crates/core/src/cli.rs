//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage, parse and I/O errors, 2 when the
//! data cannot be processed as asked (blocking validation findings, unknown
//! language pairs, correlation without segment-level scores).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::analyze::{metric_correlation_matrix, oriented_correlation_matrix, AnalyzeError};
use crate::autorank::rank_language_pair;
use crate::ingest::{
    drop_systems, merge_records, parse_policy, parse_scores, parse_system_meta, validate_dataset, PolicyConfig,
    ScoreFormat, ValidationReport,
};
use crate::model::{
    MetricRegistry, RankingResult, ScoreRecord, SelectionResult, SystemMeta, DEFAULT_K_CONSTRAINED, DEFAULT_TOTAL,
};
use crate::report::{
    render_correlations, render_rankings, render_selections, render_validation, RankingContext, RenderFormat,
};
use crate::select::select_for_humeval;

#[derive(Debug, Parser)]
#[command(name = "autorank", version, about = "Robust multi-metric ranking of MT systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute AutoRank per language pair.
    Rank(RankArgs),
    /// Choose the human-evaluation subset per language pair.
    Select(SelectArgs),
    /// Pearson correlations between metrics over segment-level scores.
    Correlate(CorrelateArgs),
    /// Check scores, metadata and policies without ranking.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoreFormatArg {
    Csv,
    Tsv,
    Jsonl,
}

impl From<ScoreFormatArg> for ScoreFormat {
    fn from(f: ScoreFormatArg) -> Self {
        match f {
            ScoreFormatArg::Csv => ScoreFormat::Csv,
            ScoreFormatArg::Tsv => ScoreFormat::Tsv,
            ScoreFormatArg::Jsonl => ScoreFormat::Jsonl,
        }
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Score file (CSV, TSV or JSONL); repeat to merge several files.
    #[arg(long = "scores", value_name = "PATH")]
    scores: Vec<PathBuf>,
    /// Score file format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    scores_format: Option<ScoreFormatArg>,
    /// System metadata (CSV or TSV).
    #[arg(long, value_name = "PATH")]
    systems: Option<PathBuf>,
    /// Policy file; defaults to a standard policy over every metric present.
    #[arg(long, value_name = "PATH")]
    policy: Option<PathBuf>,
    /// Restrict to a language pair; repeatable. Defaults to all.
    #[arg(long = "lang-pair", value_name = "LP")]
    lang_pairs: Vec<String>,
    /// Override the spread floor of every policy.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Worker threads for language pairs; defaults to the number of cores.
    #[arg(long, env = "AUTORANK_JOBS")]
    jobs: Option<usize>,
    /// Remove systems with blocking findings instead of failing.
    #[arg(long)]
    drop_incomplete_systems: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Tsv,
    Json,
    Markdown,
}

impl From<TableFormat> for RenderFormat {
    fn from(f: TableFormat) -> Self {
        match f {
            TableFormat::Tsv => RenderFormat::Tsv,
            TableFormat::Json => RenderFormat::Json,
            TableFormat::Markdown => RenderFormat::Markdown,
        }
    }
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file; defaults to standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: TableFormat,
    /// Annotate Markdown cells with a 0-100 gradient (100 = best).
    #[arg(long)]
    gradient: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ListFormat {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Read rankings from a JSON file written by `rank --format json`
    /// instead of recomputing them from scores.
    #[arg(long, value_name = "PATH", conflicts_with = "scores")]
    ranking: Option<PathBuf>,
    /// Best constrained systems taken first.
    #[arg(long, default_value_t = DEFAULT_K_CONSTRAINED)]
    k_constrained: usize,
    /// Subset size, filled by AutoRank after the constrained systems.
    #[arg(long, default_value_t = DEFAULT_TOTAL)]
    total: usize,
    /// Output file; defaults to standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: ListFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatrixFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Metrics to correlate; defaults to the policy metrics, or every metric
    /// with segment-level scores.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Negate lower-better metrics before correlating.
    #[arg(long)]
    oriented: bool,
    /// Output file; defaults to standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: MatrixFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

#[derive(Debug)]
enum CliError {
    /// Usage, parse or I/O problem.
    Input(String),
    /// Inputs are readable but cannot be processed as requested.
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Data(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Runs the tool with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let text = err.render().to_string();
            return if err.use_stderr() {
                let _ = write!(stderr, "{text}");
                1
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Rank(args) => cmd_rank(args, stdout, stderr),
        Command::Select(args) => cmd_select(args, stdout, stderr),
        Command::Correlate(args) => cmd_correlate(args, stdout, stderr),
        Command::Validate(args) => cmd_validate(args, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(stderr, "error: {}", err.message());
            err.exit_code()
        }
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

struct Inputs {
    records: Vec<ScoreRecord>,
    meta: Option<Vec<SystemMeta>>,
    policy: PolicyConfig,
    /// Policies came from `--policy` rather than from the scores.
    explicit_policy: bool,
    lang_pairs: Vec<String>,
}

impl InputArgs {
    fn load(&self) -> CliResult<Inputs> {
        if self.scores.is_empty() {
            return Err(CliError::Input("at least one --scores file is required".into()));
        }
        let mut sets = Vec::with_capacity(self.scores.len());
        for path in &self.scores {
            let format = match self.scores_format {
                Some(f) => f.into(),
                None => ScoreFormat::from_path(path).ok_or_else(|| {
                    CliError::Input(format!(
                        "{}: cannot infer score format, pass --scores-format",
                        path.display()
                    ))
                })?,
            };
            let records =
                parse_scores(open(path)?, format).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            sets.push(records);
        }
        let records = merge_records(sets).map_err(|e| CliError::Input(e.to_string()))?;

        let meta = self.systems.as_deref().map(load_meta).transpose()?;
        let mut policy = match &self.policy {
            Some(path) => parse_policy(open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?,
            None => PolicyConfig::from_scores(&records, MetricRegistry::builtin()),
        };
        if let Some(eps) = self.epsilon {
            policy = policy
                .with_epsilon(eps)
                .map_err(|e| CliError::Input(format!("--epsilon: {e}")))?;
        }

        let present: BTreeSet<&str> = records.iter().map(ScoreRecord::lang_pair).collect();
        let lang_pairs: Vec<String> = if self.lang_pairs.is_empty() {
            present.iter().map(|s| s.to_string()).collect()
        } else {
            let requested: BTreeSet<&str> = self.lang_pairs.iter().map(|s| s.trim()).collect();
            if let Some(missing) = requested.iter().find(|lp| !present.contains(*lp)) {
                return Err(CliError::Data(format!("unknown language pair: {missing}")));
            }
            requested.into_iter().map(str::to_string).collect()
        };
        Ok(Inputs {
            records,
            meta,
            policy,
            explicit_policy: self.policy.is_some(),
            lang_pairs,
        })
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Input(format!("--jobs: {e}")))
    }
}

fn load_meta(path: &Path) -> CliResult<Vec<SystemMeta>> {
    parse_system_meta(open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

impl Inputs {
    fn report(&self) -> ValidationReport {
        let mut report = validate_dataset(&self.records, self.meta.as_deref(), &self.policy);
        report
            .findings
            .retain(|f| self.lang_pairs.iter().any(|lp| lp == f.lang_pair()));
        report
    }

    /// Validates the selected language pairs, optionally dropping offending
    /// systems, and fails on any remaining blocking finding.
    fn ensure_rankable(&mut self, drop_incomplete: bool, stderr: &mut dyn Write) -> CliResult<()> {
        let mut report = self.report();
        if drop_incomplete {
            for lp in &self.lang_pairs {
                let offending = report.offending_systems(lp);
                if !offending.is_empty() {
                    let names: Vec<&str> = offending.iter().map(String::as_str).collect();
                    let _ = writeln!(stderr, "note: {lp}: dropping {}", names.join(", "));
                    self.records = drop_systems(&self.records, lp, &offending);
                }
            }
            report = self.report();
            let emptied: Vec<&String> = self
                .lang_pairs
                .iter()
                .filter(|lp| !self.records.iter().any(|r| r.lang_pair() == lp.as_str()))
                .collect();
            if let Some(lp) = emptied.first() {
                return Err(CliError::Data(format!("{lp}: no systems left after dropping")));
            }
        }
        for finding in report.findings.iter().filter(|f| !f.is_blocking()) {
            let _ = writeln!(stderr, "warning: {finding}");
        }
        if let Some(first) = report.blocking().next() {
            let count = report.blocking().count();
            return Err(CliError::Data(format!(
                "{first} ({count} blocking finding{})",
                if count == 1 { "" } else { "s" }
            )));
        }
        Ok(())
    }

    fn rank(&self, pool: &rayon::ThreadPool) -> CliResult<Vec<RankingResult>> {
        let results: Vec<_> = pool.install(|| {
            self.lang_pairs
                .par_iter()
                .map(|lp| {
                    let policy = self
                        .policy
                        .get(lp)
                        .ok_or_else(|| CliError::Data(format!("{lp}: no policy for language pair")))?;
                    rank_language_pair(&self.records, policy, &self.policy.registry)
                        .map_err(|e| CliError::Data(format!("{lp}: {e}")))
                })
                .collect()
        });
        results.into_iter().collect()
    }
}

fn select_all(
    rankings: &[RankingResult],
    meta: &[SystemMeta],
    k: usize,
    total: usize,
) -> CliResult<Vec<SelectionResult>> {
    rankings
        .iter()
        .map(|r| {
            select_for_humeval(r, meta, k, total).map_err(|e| match e {
                crate::select::SelectError::KExceedsTotal { .. } => CliError::Input(e.to_string()),
                _ => CliError::Data(format!("{}: {e}", r.lang_pair)),
            })
        })
        .collect()
}

fn cmd_rank(args: RankArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let mut inputs = args.input.load()?;
    inputs.ensure_rankable(args.input.drop_incomplete_systems, stderr)?;
    let rankings = inputs.rank(&args.input.pool()?)?;

    let selections: Option<BTreeMap<String, SelectionResult>> = match &inputs.meta {
        Some(meta) => Some(
            select_all(&rankings, meta, DEFAULT_K_CONSTRAINED, DEFAULT_TOTAL)?
                .into_iter()
                .map(|s| (s.lang_pair.clone(), s))
                .collect(),
        ),
        None => None,
    };
    let ctx = RankingContext {
        meta: inputs.meta.as_deref(),
        selections: selections.as_ref(),
        gradient: args.gradient,
    };
    let text = render_rankings(&rankings, &ctx, args.format.into());
    emit(args.out.as_deref(), &text, stdout)?;
    Ok(0)
}

fn read_rankings(path: &Path) -> CliResult<Vec<RankingResult>> {
    let value: serde_json::Value =
        serde_json::from_reader(open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let rankings: Vec<RankingResult> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|r| vec![r])
    }
    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    for r in &rankings {
        r.validate()
            .map_err(|e| CliError::Input(format!("{}: {}: {e}", path.display(), r.lang_pair)))?;
    }
    Ok(rankings)
}

fn cmd_select(args: SelectArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let systems = args
        .input
        .systems
        .as_deref()
        .ok_or_else(|| CliError::Input("select requires --systems".into()))?;
    if args.k_constrained > args.total {
        return Err(CliError::Input(format!(
            "--k-constrained ({}) exceeds --total ({})",
            args.k_constrained, args.total
        )));
    }
    let rankings = match &args.ranking {
        Some(path) => {
            let mut rankings = read_rankings(path)?;
            if !args.input.lang_pairs.is_empty() {
                for lp in &args.input.lang_pairs {
                    if !rankings.iter().any(|r| &r.lang_pair == lp) {
                        return Err(CliError::Data(format!("unknown language pair: {lp}")));
                    }
                }
                rankings.retain(|r| args.input.lang_pairs.contains(&r.lang_pair));
            }
            rankings.sort_by(|a, b| a.lang_pair.cmp(&b.lang_pair));
            rankings
        }
        None => {
            let mut inputs = args.input.load()?;
            inputs.ensure_rankable(args.input.drop_incomplete_systems, stderr)?;
            inputs.rank(&args.input.pool()?)?
        }
    };
    let meta = load_meta(systems)?;
    let selections = select_all(&rankings, &meta, args.k_constrained, args.total)?;
    let format = match args.format {
        ListFormat::Tsv => RenderFormat::Tsv,
        ListFormat::Json => RenderFormat::Json,
    };
    emit(args.out.as_deref(), &render_selections(&selections, format), stdout)?;
    Ok(0)
}

fn cmd_correlate(args: CorrelateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let inputs = args.input.load()?;
    let pool = args.input.pool()?;
    let matrices: Vec<CliResult<_>> = pool.install(|| {
        inputs
            .lang_pairs
            .par_iter()
            .map(|lp| {
                let metrics = correlation_metrics(&inputs, lp, &args.metrics)?;
                let matrix = if args.oriented {
                    oriented_correlation_matrix(&inputs.records, lp, &metrics, &inputs.policy.registry)
                } else {
                    metric_correlation_matrix(&inputs.records, lp, &metrics)
                };
                matrix.map_err(|e| match e {
                    AnalyzeError::UnknownMetric(_) => CliError::Input(e.to_string()),
                    _ => CliError::Data(e.to_string()),
                })
            })
            .collect()
    });
    let matrices = matrices.into_iter().collect::<CliResult<Vec<_>>>()?;
    for m in &matrices {
        for (i, row) in m.unmatched.iter().enumerate() {
            for (j, &n) in row.iter().enumerate().skip(i + 1) {
                if n > 0 {
                    let _ = writeln!(
                        stderr,
                        "note: {}: {} / {}: {n} unmatched segment scores dropped",
                        m.lang_pair, m.metric_ids[i], m.metric_ids[j]
                    );
                }
            }
        }
    }
    let format = match args.format {
        MatrixFormat::Csv => RenderFormat::Tsv,
        MatrixFormat::Json => RenderFormat::Json,
    };
    emit(args.out.as_deref(), &render_correlations(&matrices, format), stdout)?;
    Ok(0)
}

fn correlation_metrics(inputs: &Inputs, lp: &str, requested: &[String]) -> CliResult<Vec<String>> {
    let segment_metrics: BTreeSet<&str> = inputs
        .records
        .iter()
        .filter(|r| r.lang_pair() == lp && r.is_segment_level())
        .map(ScoreRecord::metric_id)
        .collect();
    if segment_metrics.is_empty() {
        return Err(CliError::Data(format!(
            "{lp}: only system-level scores available, correlation needs segment-level scores"
        )));
    }
    if !requested.is_empty() {
        return Ok(requested.iter().map(|m| m.trim().to_string()).collect());
    }
    Ok(match inputs.policy.get(lp) {
        Some(policy) if inputs.explicit_policy => policy.metric_ids().to_vec(),
        _ => segment_metrics.into_iter().map(str::to_string).collect(),
    })
}

fn cmd_validate(args: ValidateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<i32> {
    let inputs = args.input.load()?;
    let report = inputs.report();
    let format = match args.format {
        ReportFormat::Text => RenderFormat::Tsv,
        ReportFormat::Json => RenderFormat::Json,
    };
    stdout
        .write_all(render_validation(&report, format).as_bytes())
        .map_err(|e| CliError::Input(format!("stdout: {e}")))?;
    let blocking = report.blocking().count();
    let _ = writeln!(
        stderr,
        "{} language pair(s) checked, {blocking} blocking finding(s), {} warning(s)",
        inputs.lang_pairs.len(),
        report.findings.len() - blocking
    );
    Ok(if report.is_rankable() { 0 } else { 2 })
}
