#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use wmt_autorank::ingest::{parse_policy, parse_scores, parse_system_meta, PolicyConfig, ScoreFormat};
use wmt_autorank::{rank_language_pair, RankingResult, ScoreRecord, SystemMeta};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/wmt25")
}

pub fn data_file(name: &str) -> String {
    data_dir().join(name).to_string_lossy().into_owned()
}

pub fn scores() -> Vec<ScoreRecord> {
    parse_scores(File::open(data_dir().join("scores.tsv")).unwrap(), ScoreFormat::Tsv).unwrap()
}

pub fn systems() -> Vec<SystemMeta> {
    parse_system_meta(File::open(data_dir().join("systems.csv")).unwrap()).unwrap()
}

pub fn policy() -> PolicyConfig {
    parse_policy(File::open(data_dir().join("policy.conf")).unwrap()).unwrap()
}

pub fn rank(records: &[ScoreRecord], config: &PolicyConfig, lang_pair: &str) -> RankingResult {
    rank_language_pair(records, config.get(lang_pair).unwrap(), &config.registry).unwrap()
}

#[derive(Debug, Clone)]
pub struct Published {
    pub autorank: f64,
    pub humeval: Option<bool>,
}

/// Published AutoRank (one decimal) and Humeval marks, per language pair.
pub fn published() -> BTreeMap<String, BTreeMap<String, Published>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(data_dir().join("published.tsv"))
        .unwrap();
    let mut out: BTreeMap<String, BTreeMap<String, Published>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.unwrap();
        let humeval = match &row[3] {
            "" => None,
            v => Some(v == "true"),
        };
        out.entry(row[0].to_string()).or_default().insert(
            row[1].to_string(),
            Published {
                autorank: row[2].parse().unwrap(),
                humeval,
            },
        );
    }
    out
}

/// 1-based ranks, ties share the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn plain_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Spearman correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    plain_pearson(&average_ranks(x), &average_ranks(y))
}

/// Computed and published AutoRank for every published system of a pair.
pub fn paired(result: &RankingResult, published: &BTreeMap<String, Published>) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(result.n_systems, published.len(), "{}", result.lang_pair);
    published
        .iter()
        .map(|(system, p)| (result.get(system).unwrap().autorank, p.autorank))
        .unzip()
}

pub fn max_abs_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mean_abs_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}
