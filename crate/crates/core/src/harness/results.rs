use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{mean, median, quantile, std_dev};
use crate::error::Result;
use crate::languages::{gold_dfa, LanguageId};

/// One extraction run.
///
/// CSV header: `language,method,seed,epoch,data_count,string_length,kappa,
/// cosine_threshold,k,acc_rnn,acc_gold,prefix_acc_rnn,train_fidelity,
/// trie_size,merged_size,minimized_size,gold_equivalent,wall_ms`. Optional
/// fields are empty when they do not apply to the method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub language: u8,
    /// `merge` or `kmeans`.
    pub method: String,
    pub seed: u64,
    pub epoch: usize,
    pub data_count: usize,
    pub string_length: usize,
    pub kappa: Option<f64>,
    pub cosine_threshold: Option<f64>,
    pub k: Option<usize>,
    /// Fraction of eval strings on which the automaton and the model agree.
    pub acc_rnn: f64,
    /// Fraction of eval strings on which the automaton matches the language.
    pub acc_gold: f64,
    pub prefix_acc_rnn: f64,
    pub train_fidelity: Option<f64>,
    pub trie_size: Option<usize>,
    /// Size before minimization: the merged automaton, or the reachable
    /// cluster machine for k-means.
    pub merged_size: usize,
    pub minimized_size: usize,
    pub gold_equivalent: bool,
    pub wall_ms: f64,
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends to `path`, writing the header only when the file is new or empty.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Statistics over the runs sharing language, method, epoch, data count,
/// string length and κ. Accuracies are fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub language: u8,
    pub method: String,
    pub epoch: usize,
    pub data_count: usize,
    pub string_length: usize,
    pub kappa: Option<f64>,
    pub runs: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub acc_median: f64,
    pub acc_q1: f64,
    pub acc_q3: f64,
    pub acc_min: f64,
    pub acc_gold_mean: f64,
    pub merged_median: f64,
    pub size_median: f64,
    pub size_q1: f64,
    pub size_q3: f64,
    pub size_min: usize,
    pub size_max: usize,
    pub gold_size: usize,
    /// Runs whose minimized size equals the gold size.
    pub gold_size_runs: usize,
    pub gold_equivalent_runs: usize,
}

type GroupKey = (u8, String, usize, usize, usize, Option<u64>);

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<GroupKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (
            r.language,
            r.method.clone(),
            r.epoch,
            r.data_count,
            r.string_length,
            r.kappa.map(f64::to_bits),
        );
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(
            |((language, method, epoch, data_count, string_length, _), g)| {
                let acc: Vec<f64> = g.iter().map(|r| r.acc_rnn).collect();
                let gold: Vec<f64> = g.iter().map(|r| r.acc_gold).collect();
                let merged: Vec<f64> = g.iter().map(|r| r.merged_size as f64).collect();
                let size: Vec<f64> = g.iter().map(|r| r.minimized_size as f64).collect();
                let gold_size = LanguageId::new(language)
                    .map(|id| gold_dfa(id).num_states())
                    .unwrap_or(0);
                SummaryRow {
                    language,
                    method,
                    epoch,
                    data_count,
                    string_length,
                    kappa: g[0].kappa,
                    runs: g.len(),
                    acc_mean: mean(&acc).unwrap(),
                    acc_std: std_dev(&acc).unwrap(),
                    acc_median: median(&acc).unwrap(),
                    acc_q1: quantile(&acc, 0.25).unwrap(),
                    acc_q3: quantile(&acc, 0.75).unwrap(),
                    acc_min: acc.iter().copied().fold(f64::INFINITY, f64::min),
                    acc_gold_mean: mean(&gold).unwrap(),
                    merged_median: median(&merged).unwrap(),
                    size_median: median(&size).unwrap(),
                    size_q1: quantile(&size, 0.25).unwrap(),
                    size_q3: quantile(&size, 0.75).unwrap(),
                    size_min: g.iter().map(|r| r.minimized_size).min().unwrap(),
                    size_max: g.iter().map(|r| r.minimized_size).max().unwrap(),
                    gold_size,
                    gold_size_runs: g.iter().filter(|r| r.minimized_size == gold_size).count(),
                    gold_equivalent_runs: g.iter().filter(|r| r.gold_equivalent).count(),
                }
            },
        )
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
