use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{rng_for, ExperimentConfig, Stream, TrainingSetup};
use super::results::{summarize, write_rows, write_summary, ResultRow, SummaryRow};
use crate::automata::{equivalent, nfa_to_dot, to_dot, write_dfa, write_nfa, Dfa};
use crate::error::{Error, Result};
use crate::extraction::{extract, ExtractionReport, MergePolicy};
use crate::kmeans::{kmeans_extract, KMeansExtraction};
use crate::languages::{
    gold_dfa, sample_balanced, sample_eval_set, sample_uniform_string, write_dataset,
    LabeledSample, LanguageId, PositiveSampler,
};
use crate::rnn::{
    read_checkpoint, select_best_epoch, train, write_checkpoint, write_metrics_csv, Checkpoint,
    CheckpointMeta, EpochMetrics, RnnModel,
};

/// Agreement of an automaton with a model and with the language on an eval set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fidelity {
    /// Full-string verdicts equal to the model's.
    pub vs_rnn: f64,
    /// Full-string verdicts equal to the stored gold labels.
    pub vs_gold: f64,
    /// Per-prefix verdicts equal to the model's.
    pub prefix_vs_rnn: f64,
}

pub fn fidelity(dfa: &Dfa, model: &RnnModel, eval: &[LabeledSample]) -> Result<Fidelity> {
    if eval.is_empty() {
        return Err(Error::InvalidArgument("empty eval set".into()));
    }
    dfa.alphabet().ensure_same(model.alphabet())?;
    let (mut rnn, mut gold, mut prefix, mut prefixes) = (0usize, 0usize, 0usize, 0usize);
    for s in eval {
        let tokens = dfa.alphabet().encode(&s.x)?;
        let ours = dfa.prefix_decisions_indices(&tokens);
        let theirs = model.forward_indices(&tokens).decisions();
        rnn += usize::from(ours.last() == theirs.last());
        gold += usize::from(ours.last() == s.y.last());
        prefix += ours.iter().zip(&theirs).filter(|(a, b)| a == b).count();
        prefixes += ours.len();
    }
    let n = eval.len() as f64;
    Ok(Fidelity {
        vs_rnn: rnn as f64 / n,
        vs_gold: gold as f64 / n,
        prefix_vs_rnn: prefix as f64 / prefixes as f64,
    })
}

/// Every checkpoint of one training run.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub language: LanguageId,
    pub checkpoints: Vec<Checkpoint>,
    pub metrics: Vec<EpochMetrics>,
}

impl TrainedModel {
    pub fn best_epoch(&self) -> usize {
        select_best_epoch(&self.metrics).expect("at least one epoch")
    }

    pub fn best(&self) -> &Checkpoint {
        self.at_epoch(self.best_epoch())
            .expect("best epoch was saved")
    }

    pub fn best_dev_accuracy(&self) -> f64 {
        self.best().meta.dev_accuracy
    }

    pub fn converged(&self) -> bool {
        self.best_dev_accuracy() == 1.0
    }

    pub fn at_epoch(&self, epoch: usize) -> Result<&Checkpoint> {
        self.checkpoints
            .iter()
            .find(|c| c.meta.epoch == epoch)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{}: no checkpoint for epoch {epoch}",
                    self.language
                ))
            })
    }
}

/// What a model directory was trained with; written last, so its presence
/// marks a complete run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainingRecord {
    language: u8,
    seed: u64,
    training: TrainingSetup,
}

pub fn model_dir(config: &ExperimentConfig, id: LanguageId) -> PathBuf {
    config
        .out_dir
        .join("models")
        .join(id.to_string())
        .join(format!("seed{}", config.seed))
}

fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("epoch{epoch:02}.ckpt"))
}

fn record(config: &ExperimentConfig, id: LanguageId) -> TrainingRecord {
    TrainingRecord {
        language: id.index(),
        seed: config.seed,
        training: config.training.clone(),
    }
}

/// Trains one recognizer and writes its checkpoints, metrics, datasets and
/// config under [`model_dir`].
pub fn train_language(config: &ExperimentConfig, id: LanguageId) -> Result<TrainedModel> {
    let t = &config.training;
    let dir = model_dir(config, id);
    std::fs::create_dir_all(&dir)?;
    let _ = std::fs::remove_file(dir.join("training.json"));
    let lang = u64::from(id.index());
    let train_set = sample_balanced(
        id,
        t.train_length,
        t.train_count,
        &mut rng_for(config.seed, Stream::TrainData, &[lang]),
    );
    let dev_set = sample_balanced(
        id,
        t.dev_length,
        t.dev_count,
        &mut rng_for(config.seed, Stream::DevData, &[lang]),
    );
    let meta = [
        ("language", id.to_string()),
        ("seed", config.seed.to_string()),
    ];
    std::fs::write(dir.join("train.tsv"), write_dataset(&meta, &train_set))?;
    std::fs::write(dir.join("dev.tsv"), write_dataset(&meta, &dev_set))?;
    config.save_in(&dir)?;

    let model = RnnModel::init(
        crate::automata::Alphabet::binary(),
        t.embed_dim,
        t.hidden_dim,
        &mut rng_for(config.seed, Stream::Init, &[lang]),
    )?;
    info!(
        "training {id}: {} strings of length {}",
        t.train_count, t.train_length
    );
    let mut metrics_so_far: Vec<EpochMetrics> = Vec::new();
    let run = train(
        model,
        &train_set,
        &dev_set,
        &t.train_config(),
        &CheckpointMeta {
            language: Some(id.index()),
            seed: config.seed,
            ..CheckpointMeta::default()
        },
        &mut rng_for(config.seed, Stream::Shuffle, &[lang]),
        |ckpt, m| {
            std::fs::write(
                checkpoint_path(&dir, ckpt.meta.epoch),
                write_checkpoint(ckpt),
            )?;
            metrics_so_far.push(m.clone());
            write_metrics_csv(
                std::fs::File::create(dir.join("metrics.csv"))?,
                &metrics_so_far,
            )
        },
    )?;
    std::fs::write(
        dir.join("training.json"),
        serde_json::to_string_pretty(&record(config, id))?,
    )?;
    let trained = TrainedModel {
        language: id,
        checkpoints: run.checkpoints,
        metrics: run.metrics,
    };
    if !trained.converged() {
        warn!(
            "{id}: best dev accuracy {:.6} at epoch {} is below 100%",
            trained.best_dev_accuracy(),
            trained.best_epoch()
        );
    }
    Ok(trained)
}

/// Loads a complete training run made with the current training setup.
pub fn load_trained(config: &ExperimentConfig, id: LanguageId) -> Result<TrainedModel> {
    let dir = model_dir(config, id);
    let marker = dir.join("training.json");
    let stored: TrainingRecord = match std::fs::read_to_string(&marker) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => return Err(Error::MissingCheckpoint(marker)),
    };
    if stored != record(config, id) {
        return Err(Error::InvalidArgument(format!(
            "{} was trained with a different setup",
            dir.display()
        )));
    }
    let mut reader = csv::Reader::from_path(dir.join("metrics.csv"))?;
    let metrics: Vec<EpochMetrics> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    let checkpoints = metrics
        .iter()
        .map(|m| {
            let path = checkpoint_path(&dir, m.epoch);
            let text =
                std::fs::read_to_string(&path).map_err(|_| Error::MissingCheckpoint(path))?;
            read_checkpoint(&text)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedModel {
        language: id,
        checkpoints,
        metrics,
    })
}

/// Loads the run if present, otherwise trains when allowed.
pub fn ensure_trained(
    config: &ExperimentConfig,
    id: LanguageId,
    allow_training: bool,
) -> Result<TrainedModel> {
    match load_trained(config, id) {
        Ok(m) => Ok(m),
        Err(e) if allow_training => {
            info!("{id}: {e}; training");
            train_language(config, id)
        }
        Err(e) => Err(e),
    }
}

pub fn ensure_all_trained(
    config: &ExperimentConfig,
    allow_training: bool,
) -> Result<Vec<TrainedModel>> {
    par_map(config.threads, config.language_ids(), |id| {
        ensure_trained(config, id, allow_training)
    })
    .into_iter()
    .collect()
}

/// Runs `f` over `items` on `threads` workers (0 = all cores), keeping order.
pub fn par_map<T, R, F>(threads: usize, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| items.into_par_iter().map(&f).collect())
}

pub fn eval_set(config: &ExperimentConfig, id: LanguageId) -> Vec<LabeledSample> {
    sample_eval_set(
        id,
        config.extraction.eval_count,
        config.extraction.eval_max_length,
        &mut rng_for(
            config.extraction.eval_seed,
            Stream::Eval,
            &[u64::from(id.index())],
        ),
    )
}

/// Extraction strings for one data seed: uniform strings at even positions
/// and uniform members of the language at odd ones, so every prefix of the
/// list is balanced and larger counts extend smaller ones.
pub fn extraction_strings(id: LanguageId, seed: u64, length: usize, count: usize) -> Vec<String> {
    let mut rng = rng_for(
        seed,
        Stream::Extraction,
        &[u64::from(id.index()), length as u64],
    );
    let mut sampler = PositiveSampler::for_language(id);
    if count > 1 && !sampler.feasible(length) {
        warn!("{id} has no strings of length {length}; using uniform strings only");
    }
    (0..count)
        .map(|i| {
            let w = sample_uniform_string(length, &mut rng);
            if i % 2 == 1 {
                sampler.sample(length, &mut rng).unwrap_or(w)
            } else {
                w
            }
        })
        .collect()
}

/// Shared inputs for every job on one language.
#[derive(Clone, Debug)]
pub struct LanguageContext {
    pub id: LanguageId,
    pub gold: Dfa,
    pub eval: Vec<LabeledSample>,
}

impl LanguageContext {
    pub fn new(config: &ExperimentConfig, id: LanguageId) -> Self {
        LanguageContext {
            id,
            gold: gold_dfa(id),
            eval: eval_set(config, id),
        }
    }
}

/// One state-merging extraction with its evaluation.
pub fn run_merge(
    ctx: &LanguageContext,
    ckpt: &Checkpoint,
    seed: u64,
    strings: &[String],
    string_length: usize,
    policy: &MergePolicy,
) -> Result<(ResultRow, ExtractionReport)> {
    let start = Instant::now();
    let report = extract(&ckpt.model, strings, policy)?;
    let fid = fidelity(&report.minimized, &ckpt.model, &ctx.eval)?;
    let row = ResultRow {
        language: ctx.id.index(),
        method: "merge".into(),
        seed,
        epoch: ckpt.meta.epoch,
        data_count: strings.len(),
        string_length,
        kappa: Some(policy.kappa()),
        cosine_threshold: Some(policy.threshold()),
        k: None,
        acc_rnn: fid.vs_rnn,
        acc_gold: fid.vs_gold,
        prefix_acc_rnn: fid.prefix_vs_rnn,
        train_fidelity: Some(report.train_fidelity),
        trie_size: Some(report.trie_size),
        merged_size: report.merged_size,
        minimized_size: report.minimized_size,
        gold_equivalent: equivalent(&report.minimized, &ctx.gold)?,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((row, report))
}

/// One k-means baseline extraction with its evaluation.
pub fn run_kmeans<R: Rng + ?Sized>(
    ctx: &LanguageContext,
    ckpt: &Checkpoint,
    seed: u64,
    strings: &[String],
    string_length: usize,
    k: usize,
    rng: &mut R,
) -> Result<(ResultRow, KMeansExtraction)> {
    let start = Instant::now();
    let ex = kmeans_extract(&ckpt.model, strings, k, rng)?;
    let fid = fidelity(&ex.minimized, &ckpt.model, &ctx.eval)?;
    let row = ResultRow {
        language: ctx.id.index(),
        method: "kmeans".into(),
        seed,
        epoch: ckpt.meta.epoch,
        data_count: strings.len(),
        string_length,
        kappa: None,
        cosine_threshold: None,
        k: Some(ex.k),
        acc_rnn: fid.vs_rnn,
        acc_gold: fid.vs_gold,
        prefix_acc_rnn: fid.prefix_vs_rnn,
        train_fidelity: None,
        trie_size: None,
        merged_size: ex.raw.num_states(),
        minimized_size: ex.minimized.num_states(),
        gold_equivalent: equivalent(&ex.minimized, &ctx.gold)?,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((row, ex))
}

fn check_converged(models: &[TrainedModel]) {
    for m in models {
        if !m.converged() {
            warn!(
                "{}: best dev accuracy {:.6} is below 100%; results for it are not comparable",
                m.language,
                m.best_dev_accuracy()
            );
        }
    }
}

fn model_for(models: &[TrainedModel], id: LanguageId) -> Result<&TrainedModel> {
    models
        .iter()
        .find(|m| m.language == id)
        .ok_or_else(|| Error::InvalidArgument(format!("no trained model for {id}")))
}

fn finish(dir: &Path, config: &ExperimentConfig, rows: Vec<ResultRow>) -> Result<Experiment> {
    let summary = summarize(&rows);
    write_rows(&dir.join("results.csv"), &rows)?;
    write_summary(&dir.join("summary.csv"), &summary)?;
    config.save_in(dir)?;
    Ok(Experiment { rows, summary })
}

/// Raw rows and grouped statistics of one experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

/// State merging and the k-means baseline on every language and data seed,
/// using each language's best checkpoint. Writes `table2/`.
pub fn reproduce_table2(config: &ExperimentConfig, models: &[TrainedModel]) -> Result<Experiment> {
    check_converged(models);
    let dir = config.out_dir.join("table2");
    let ext = &config.extraction;
    let mut jobs = Vec::new();
    for id in config.language_ids() {
        for &seed in &config.data_seeds {
            jobs.push((id, seed));
        }
    }
    let results = par_map(
        config.threads,
        jobs,
        |(id, seed)| -> Result<Vec<ResultRow>> {
            let ctx = LanguageContext::new(config, id);
            let ckpt = model_for(models, id)?.best();
            let strings = extraction_strings(id, seed, ext.string_length, ext.data_count);
            let (merge, report) = run_merge(
                &ctx,
                ckpt,
                seed,
                &strings,
                ext.string_length,
                &config.policy(),
            )?;
            let mut rng = rng_for(seed, Stream::KMeans, &[u64::from(id.index())]);
            let (km, kex) = run_kmeans(
                &ctx,
                ckpt,
                seed,
                &strings,
                ext.string_length,
                config.baseline.k,
                &mut rng,
            )?;
            let sub = dir.join(id.to_string());
            std::fs::create_dir_all(&sub)?;
            std::fs::write(
                sub.join(format!("merge-seed{seed}.dfa")),
                write_dfa(&report.minimized),
            )?;
            std::fs::write(
                sub.join(format!("kmeans-seed{seed}.dfa")),
                write_dfa(&kex.minimized),
            )?;
            Ok(vec![merge, km])
        },
    );
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?.concat();
    finish(&dir, config, rows)
}

/// Accuracy and size against the number of trie strings. Writes `sweep-data/`.
pub fn sweep_data_size(config: &ExperimentConfig, models: &[TrainedModel]) -> Result<Experiment> {
    check_converged(models);
    let sw = &config.sweeps;
    let max = sw.data_counts.iter().copied().max().unwrap_or(0);
    let mut jobs = Vec::new();
    for id in config.language_ids() {
        for &seed in &config.data_seeds {
            jobs.push((id, seed));
        }
    }
    let results = par_map(
        config.threads,
        jobs,
        |(id, seed)| -> Result<Vec<ResultRow>> {
            let ctx = LanguageContext::new(config, id);
            let ckpt = model_for(models, id)?.best();
            let strings = extraction_strings(id, seed, sw.data_string_length, max);
            sw.data_counts
                .iter()
                .map(|&n| {
                    run_merge(
                        &ctx,
                        ckpt,
                        seed,
                        &strings[..n],
                        sw.data_string_length,
                        &config.policy(),
                    )
                    .map(|r| r.0)
                })
                .collect()
        },
    );
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?.concat();
    finish(&config.out_dir.join("sweep-data"), config, rows)
}

/// Extraction on one language at several κ, with DOT snapshots of the merged
/// and minimized machines. Writes `sweep-kappa/`.
pub fn sweep_kappa(config: &ExperimentConfig, models: &[TrainedModel]) -> Result<Experiment> {
    let id = LanguageId::new(config.sweeps.kappa_language)?;
    let model = model_for(models, id)?;
    check_converged(std::slice::from_ref(model));
    let dir = config.out_dir.join("sweep-kappa");
    std::fs::create_dir_all(&dir)?;
    let ext = &config.extraction;
    let mut jobs = Vec::new();
    for &seed in &config.data_seeds {
        for &kappa in &config.sweeps.kappas {
            jobs.push((seed, kappa));
        }
    }
    let ctx = LanguageContext::new(config, id);
    let results = par_map(config.threads, jobs, |(seed, kappa)| -> Result<ResultRow> {
        let strings = extraction_strings(id, seed, ext.string_length, ext.data_count);
        let (row, report) = run_merge(
            &ctx,
            model.best(),
            seed,
            &strings,
            ext.string_length,
            &MergePolicy::new(kappa)?,
        )?;
        let stem = format!("{id}-kappa{kappa}-seed{seed}");
        std::fs::write(
            dir.join(format!("{stem}-merged.dot")),
            nfa_to_dot(&report.merged),
        )?;
        std::fs::write(
            dir.join(format!("{stem}-merged.nfa")),
            write_nfa(&report.merged),
        )?;
        std::fs::write(
            dir.join(format!("{stem}-minimized.dot")),
            to_dot(&report.minimized),
        )?;
        Ok(row)
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    finish(&dir, config, rows)
}

/// Sizes across training epochs at the configured data count, plus accuracy
/// against data count at the early and late epochs. Writes `sweep-epochs/`.
pub fn sweep_epochs(config: &ExperimentConfig, models: &[TrainedModel]) -> Result<Experiment> {
    let sw = &config.sweeps;
    let ext = &config.extraction;
    let mut jobs: BTreeSet<(u8, usize, u64, usize)> = BTreeSet::new();
    for id in config.language_ids() {
        let model = model_for(models, id)?;
        let epochs: Vec<usize> = if sw.epochs.is_empty() {
            model.metrics.iter().map(|m| m.epoch).collect()
        } else {
            sw.epochs.clone()
        };
        for &seed in &sw.epoch_seeds {
            for &e in &epochs {
                jobs.insert((id.index(), e, seed, ext.data_count));
            }
            for e in [sw.early_epoch, sw.late_epoch] {
                for &n in &sw.epoch_data_counts {
                    jobs.insert((id.index(), e, seed, n));
                }
            }
        }
    }
    let contexts: Vec<LanguageContext> = config
        .language_ids()
        .into_iter()
        .map(|id| LanguageContext::new(config, id))
        .collect();
    let results = par_map(
        config.threads,
        jobs.into_iter().collect(),
        |(l, e, seed, n)| {
            let ctx = contexts
                .iter()
                .find(|c| c.id.index() == l)
                .expect("context per language");
            let ckpt = model_for(models, ctx.id)?.at_epoch(e)?;
            let strings = extraction_strings(ctx.id, seed, ext.string_length, n);
            run_merge(
                ctx,
                ckpt,
                seed,
                &strings,
                ext.string_length,
                &config.policy(),
            )
            .map(|r| r.0)
        },
    );
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    finish(&config.out_dir.join("sweep-epochs"), config, rows)
}

/// Smallest data count at which `pred` holds for the rows of one language,
/// epoch and seed.
pub fn data_needed(
    rows: &[ResultRow],
    language: u8,
    epoch: usize,
    seed: u64,
    pred: impl Fn(&ResultRow) -> bool,
) -> Option<usize> {
    rows.iter()
        .filter(|r| r.language == language && r.epoch == epoch && r.seed == seed && pred(r))
        .map(|r| r.data_count)
        .min()
}
